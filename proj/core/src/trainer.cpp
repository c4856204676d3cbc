#include "protoflow/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "protoflow/errors.hpp"
#include "protoflow/optim.hpp"
#include "protoflow/parallel.hpp"

namespace protoflow {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoField: return "no_field";
    case Variant::kNoCurve: return "no_curve";
    case Variant::kNoSep: return "no_sep";
    case Variant::kNoTime: return "no_time";
    case Variant::kNoNorm: return "no_norm";
    case Variant::kFineTune: return "finetune";
    case Variant::kJointOracle: return "joint_oracle";
  }
  return "unknown";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  for (Variant v : {Variant::kFull, Variant::kNoField, Variant::kNoCurve,
                    Variant::kNoSep, Variant::kNoTime, Variant::kNoNorm,
                    Variant::kFineTune, Variant::kJointOracle})
    if (variant_name(v) == name) return v;
  return std::nullopt;
}

std::vector<Variant> ablation_variants() {
  return {Variant::kFull,  Variant::kNoField, Variant::kNoCurve,
          Variant::kNoSep, Variant::kNoTime,  Variant::kNoNorm};
}

VariantSwitches resolve_variant(Variant v, const LossWeights& base) {
  VariantSwitches s;
  s.weights = base;
  switch (v) {
    case Variant::kFull:
      break;
    case Variant::kNoField:
      s.use_flow_field = false;
      s.weights.lambda_flow = 0.0;
      break;
    case Variant::kNoCurve:
      s.weights.lambda_curve = 0.0;
      break;
    case Variant::kNoSep:
      s.weights.lambda_sep = 0.0;
      break;
    case Variant::kNoTime:
      s.use_time = false;
      break;
    case Variant::kNoNorm:
      s.normalize_prototypes = false;
      break;
    case Variant::kJointOracle:
      s.cumulative_data = true;
      [[fallthrough]];
    case Variant::kFineTune:
      s.use_flow_field = false;
      s.use_distillation = false;
      s.use_memory = false;
      s.weights.lambda_dist = 0.0;
      s.weights.lambda_flow = 0.0;
      s.weights.lambda_curve = 0.0;
      s.weights.lambda_sep = 0.0;
      break;
  }
  return s;
}

double poly_lr_from_config(const TrainConfig& cfg, int iter) {
  return poly_lr(iter, cfg.iterations_per_step, cfg.base_lr, cfg.warmup_iterations,
                 cfg.warmup_start_lr, cfg.poly_power);
}

namespace {

std::optional<Vec> try_normalize(const Vec& v) {
  if (norm2(v) <= 1e-9) return std::nullopt;
  return normalized(v);
}

// Everything the incremental loop owns while running.
struct TrainerState {
  const TaskSchedule* schedule = nullptr;
  TrainConfig cfg;
  VariantSwitches sw;
  Rng master;

  std::vector<std::vector<Sample>> train_data;  // per step
  std::vector<double> effective_tau;            // per step (mean sample time)
  std::map<int, int> first_step;
  std::map<int, std::vector<Vec>> probe_sets;   // fixed raw inputs per class

  Encoder encoder;
  Head head;
  FlowField flow;
  std::optional<Teacher> teacher;
  PrototypeBank bank;
  MemoryBuffer memory;
  RunRecord record;

  explicit TrainerState(std::uint64_t seed) : master(seed) {}

  double tau_first_of(int cls) const {
    return schedule->timestamps[first_step.at(cls)];
  }
  double tau_last() const { return schedule->timestamps.back(); }
};

struct PoolEntry {
  const Sample* sample = nullptr;
  bool replay = false;
};

std::vector<PoolEntry> build_pool(const TrainerState& st, int t) {
  std::vector<PoolEntry> pool;
  if (st.sw.cumulative_data) {
    for (int s = 0; s <= t; ++s)
      for (const Sample& smp : st.train_data[s]) pool.push_back({&smp, false});
    return pool;
  }
  for (const Sample& smp : st.train_data[t]) pool.push_back({&smp, false});
  if (st.sw.use_memory)
    for (const Sample* smp : st.memory.flattened()) pool.push_back({smp, true});
  return pool;
}

void evaluate_step(TrainerState& st, int t) {
  const TaskSchedule& schedule = *st.schedule;
  const std::vector<int> classes = schedule.classes_up_to(t);
  std::map<int, int> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = static_cast<int>(i);

  ConfusionMatrix cm(static_cast<int>(classes.size()));
  // Span mode scores every step against the same fixed validation set (the
  // domain-incremental protocol), so its stream is keyed by class only.
  Rng rng_step = st.master.split(2000 + t);
  for (int cls : classes) {
    Rng rng_span = st.master.split(2100 + cls);
    Rng& rng = st.cfg.eval_time_mode == EvalTimeMode::kSpan ? rng_span : rng_step;
    for (int j = 0; j < st.cfg.eval_per_class; ++j) {
      double tau_eval = schedule.timestamps[t];
      if (st.cfg.eval_time_mode == EvalTimeMode::kIntroduction)
        tau_eval = schedule.timestamps[st.first_step.at(cls)];
      else if (st.cfg.eval_time_mode == EvalTimeMode::kSpan)
        tau_eval = rng.uniform(schedule.timestamps.front(), schedule.timestamps.back());
      const Vec mean = class_mean_at(schedule, cls, tau_eval);
      Vec x(mean.size());
      for (std::size_t d = 0; d < mean.size(); ++d)
        x[d] = mean[d] + schedule.noise_std * rng.normal();
      const Vec feat = encode(st.encoder, x);
      const Vec lg = logits(st.head, feat);
      std::size_t best = 0;
      for (std::size_t r = 1; r < lg.size(); ++r)
        if (lg[r] > lg[best]) best = r;
      cm.at(index[cls], index[st.head.rows[best].class_id]) += 1;
    }
  }

  const auto iou = iou_from_confusion(cm);
  std::map<int, double>& iou_row = st.record.iou_history[t];
  std::map<int, double>& acc_row = st.record.acc_history[t];
  for (int cls : classes) {
    const int i = index[cls];
    iou_row[cls] = iou[i].value_or(0.0);
    std::int64_t row = 0;
    for (int j = 0; j < cm.num_classes; ++j) row += cm.at(i, j);
    acc_row[cls] = row > 0 ? static_cast<double>(cm.at(i, i)) / row : 0.0;
  }
  if (t == schedule.horizon()) st.record.final_confusion = cm;
}

void run_step(TrainerState& st, int t) {
  const TaskSchedule& schedule = *st.schedule;
  const LossWeights& w = st.sw.weights;

  if (t > 0 && st.sw.use_distillation)
    st.teacher = freeze_teacher(st.encoder, st.head);
  const std::size_t old_rows = st.head.rows.size();

  Rng rng_grow = st.master.split(500 + t);
  grow_head(st.head, schedule.class_sets[t], st.cfg.feat_dim, st.cfg.head_init_std,
            rng_grow);

  const std::vector<PoolEntry> pool = build_pool(st, t);
  if (pool.empty()) throw StateError("run_step: empty training pool");

  Rng rng_train = st.master.split(3000 + t);
  SgdState opt_state;

  const bool flow_active = st.sw.use_flow_field && w.lambda_flow > 0.0 && t > 0;
  const bool distill_active = st.sw.use_distillation && w.lambda_dist > 0.0 && t > 0;

  const int batch = st.cfg.batch_size;
  std::vector<const Sample*> samples(batch);
  std::vector<bool> replayed(batch);
  std::vector<Vec> feats(batch);
  std::vector<Mlp2Cache> caches(batch);
  std::vector<Vec> student_logits(batch);
  std::vector<std::size_t> label_rows(batch);

  for (int iter = 0; iter < st.cfg.iterations_per_step; ++iter) {
    for (int b = 0; b < batch; ++b) {
      const PoolEntry& entry = pool[rng_train.uniform_index(pool.size())];
      samples[b] = entry.sample;
      replayed[b] = entry.replay;
      feats[b] = encode(st.encoder, samples[b]->x, &caches[b]);
      student_logits[b] = logits(st.head, feats[b]);
      const auto row = st.head.row_of(samples[b]->y);
      if (!row) throw StateError("run_step: label outside current head");
      label_rows[b] = *row;
    }

    // Segmentation (per-sample cross-entropy).
    std::vector<Vec> grad_logits;
    const double seg = ce_loss(student_logits, label_rows, &grad_logits);

    // Distillation on old classes; applied to new-step samples only
    // (replayed exemplars already carry their ground-truth labels).
    double dist = 0.0;
    if (distill_active && old_rows > 0) {
      std::vector<Vec> teacher_logits, student_old;
      std::vector<int> distilled;
      for (int b = 0; b < batch; ++b) {
        if (replayed[b]) continue;
        const Vec tfeat = encode(st.teacher->encoder, samples[b]->x);
        teacher_logits.push_back(logits(st.teacher->head, tfeat));
        student_old.emplace_back(student_logits[b].begin(),
                                 student_logits[b].begin() + old_rows);
        distilled.push_back(b);
      }
      if (!distilled.empty()) {
        std::vector<std::size_t> rows(old_rows);
        for (std::size_t r = 0; r < old_rows; ++r) rows[r] = r;
        std::vector<Vec> grad_old;
        dist = kl_distill(teacher_logits, student_old, w.distill_temperature, rows,
                          &grad_old);
        for (std::size_t k = 0; k < distilled.size(); ++k)
          for (std::size_t r = 0; r < old_rows; ++r)
            grad_logits[distilled[k]][r] += w.lambda_dist * grad_old[k][r];
      }
    }

    // Differentiable batch prototypes and the detached EMA update.
    std::map<int, std::vector<std::size_t>> members;
    for (int b = 0; b < batch; ++b) members[samples[b]->y].push_back(b);
    std::map<int, Vec> batch_protos;
    for (const auto& [cls, idx] : members) {
      Vec sum(st.cfg.feat_dim, 0.0);
      for (std::size_t b : idx) axpy(1.0, feats[b], sum);
      batch_protos[cls] = scale(sum, 1.0 / static_cast<double>(idx.size()));
      ema_update(st.bank, cls, batch_protos[cls], st.cfg.ema_alpha);
    }

    std::map<int, Vec> proto_grad;  // d(total)/d(raw batch prototype), weighted
    auto add_proto_grad = [&](int cls, const Vec& g) {
      auto it = proto_grad.try_emplace(cls, Vec(st.cfg.feat_dim, 0.0)).first;
      axpy(1.0, g, it->second);
    };

    Mlp2Params grad_flow;
    if (st.sw.use_flow_field)
      grad_flow = make_mlp2(st.flow.params.in_dim(), st.flow.params.hidden_dim(),
                            st.flow.params.out_dim());

    // Flow consistency: Euler-predict old prototypes from the previous
    // snapshot, pull the observed batch prototype toward the prediction.
    double flow_sum = 0.0;
    if (flow_active) {
      const double dtau = st.effective_tau[t] - st.effective_tau[t - 1];
      for (const auto& [cls, proto_raw] : batch_protos) {
        if (st.first_step.at(cls) > t - 1) continue;
        const auto traj_it = st.record.trajectories.find(cls);
        if (traj_it == st.record.trajectories.end()) continue;
        const TrajectoryPoint* src_pt = traj_it->second.at_step(t - 1);
        if (!src_pt) continue;

        std::optional<Vec> src = st.sw.normalize_prototypes
                                     ? try_normalize(src_pt->mu)
                                     : std::optional<Vec>(src_pt->mu);
        std::optional<Vec> target = st.sw.normalize_prototypes
                                        ? try_normalize(proto_raw)
                                        : std::optional<Vec>(proto_raw);
        if (!src || !target) continue;

        Vec enc_t;
        if (st.sw.use_time) {
          bool degen = false;
          enc_t = encode_time(st.cfg.time_encoding, src_pt->tau, st.tau_first_of(cls),
                              st.tau_last(), &degen);
          if (degen) st.record.time_encoding_degenerate = true;
        }
        Mlp2Cache fcache;
        const Vec v = predict_velocity(st.flow, *src, enc_t, &fcache);
        Vec mu_hat = *src;
        axpy(dtau, v, mu_hat);

        Vec pred;
        if (st.sw.normalize_prototypes) {
          const auto p = try_normalize(mu_hat);
          if (!p) continue;
          pred = *p;
        } else {
          pred = mu_hat;
        }

        const Vec r = sub(pred, *target);
        flow_sum += dot(r, r);

        Vec d_pred = scale(r, 2.0 * w.lambda_flow);
        if (st.sw.normalize_prototypes) d_pred = normalize_backward(mu_hat, d_pred);
        predict_velocity_backward(st.flow, fcache, scale(d_pred, dtau), grad_flow);

        Vec d_target = scale(r, -2.0 * w.lambda_flow);
        if (st.sw.normalize_prototypes)
          d_target = normalize_backward(proto_raw, d_target);
        add_proto_grad(cls, d_target);
      }
    }

    // Curvature: newest available triple, only the step-t prototype moves.
    double curve_sum = 0.0;
    if (w.lambda_curve > 0.0) {
      for (const auto& [cls, proto_raw] : batch_protos) {
        const auto traj_it = st.record.trajectories.find(cls);
        if (traj_it == st.record.trajectories.end()) continue;
        const TrajectoryPoint* p1 = traj_it->second.at_step(t - 1);
        const TrajectoryPoint* p2 = traj_it->second.at_step(t - 2);
        if (!p1 || !p2) continue;
        std::optional<Vec> a = st.sw.normalize_prototypes ? try_normalize(p2->mu)
                                                          : std::optional<Vec>(p2->mu);
        std::optional<Vec> mid = st.sw.normalize_prototypes
                                     ? try_normalize(p1->mu)
                                     : std::optional<Vec>(p1->mu);
        std::optional<Vec> x = st.sw.normalize_prototypes
                                   ? try_normalize(proto_raw)
                                   : std::optional<Vec>(proto_raw);
        if (!a || !mid || !x) continue;
        Vec kappa(x->size());
        for (std::size_t i = 0; i < kappa.size(); ++i)
          kappa[i] = (*x)[i] - 2.0 * (*mid)[i] + (*a)[i];
        curve_sum += dot(kappa, kappa);
        Vec d_x = scale(kappa, 2.0 * w.lambda_curve);
        if (st.sw.normalize_prototypes) d_x = normalize_backward(proto_raw, d_x);
        add_proto_grad(cls, d_x);
      }
    }

    // Separation: differentiable batch prototypes where observed, detached
    // EMA values otherwise, all classes seen so far.
    double sep_sum = 0.0;
    if (w.lambda_sep > 0.0) {
      std::vector<int> sep_classes;
      std::vector<Vec> sep_vecs;
      std::vector<Vec> sep_raw;
      std::vector<bool> sep_diff;
      for (int cls : schedule.classes_up_to(t)) {
        const Vec* raw = nullptr;
        bool diff = false;
        if (auto it = batch_protos.find(cls); it != batch_protos.end()) {
          raw = &it->second;
          diff = true;
        } else if (auto bit = st.bank.prototypes.find(cls); bit != st.bank.prototypes.end()) {
          raw = &bit->second;
        } else {
          continue;
        }
        std::optional<Vec> v = st.sw.normalize_prototypes ? try_normalize(*raw)
                                                          : std::optional<Vec>(*raw);
        if (!v) continue;
        sep_classes.push_back(cls);
        sep_vecs.push_back(std::move(*v));
        sep_raw.push_back(*raw);
        sep_diff.push_back(diff);
      }
      std::vector<Vec> sep_grads;
      sep_sum = separation_loss(sep_vecs, w.margin, &sep_grads);
      for (std::size_t k = 0; k < sep_classes.size(); ++k) {
        if (!sep_diff[k]) continue;
        Vec g = scale(sep_grads[k], w.lambda_sep);
        if (st.sw.normalize_prototypes) g = normalize_backward(sep_raw[k], g);
        add_proto_grad(sep_classes[k], g);
      }
    }

    LossBreakdown breakdown;
    try {
      breakdown = total_loss(seg, dist, flow_sum, curve_sum, sep_sum, w);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(t) + " iter " +
                         std::to_string(iter) + ": " + e.what());
    }

    // Backprop into the encoder; prototype gradients fan out 1/N_c per member.
    Mlp2Params grad_enc = make_mlp2(st.encoder.params.in_dim(),
                                    st.encoder.params.hidden_dim(),
                                    st.encoder.params.out_dim());
    Head grad_head = make_grad_head(st.head);
    for (int b = 0; b < batch; ++b) {
      Vec gfeat = logits_backward(st.head, feats[b], grad_logits[b], grad_head);
      const int cls = samples[b]->y;
      if (auto it = proto_grad.find(cls); it != proto_grad.end())
        axpy(1.0 / static_cast<double>(members[cls].size()), it->second, gfeat);
      encode_backward(st.encoder, caches[b], gfeat, grad_enc);
    }

    std::vector<TensorRef> params{ref(st.encoder.params.w1), ref(st.encoder.params.b1),
                                  ref(st.encoder.params.w2), ref(st.encoder.params.b2)};
    std::vector<TensorRef> grads{ref(grad_enc.w1), ref(grad_enc.b1),
                                 ref(grad_enc.w2), ref(grad_enc.b2)};
    for (std::size_t r = 0; r < st.head.rows.size(); ++r) {
      params.push_back(ref(st.head.rows[r].w));
      params.push_back({&st.head.rows[r].b, 1});
      grads.push_back(ref(grad_head.rows[r].w));
      grads.push_back({&grad_head.rows[r].b, 1});
    }
    if (st.sw.use_flow_field) {
      params.push_back(ref(st.flow.params.w1));
      params.push_back(ref(st.flow.params.b1));
      params.push_back(ref(st.flow.params.w2));
      params.push_back(ref(st.flow.params.b2));
      grads.push_back(ref(grad_flow.w1));
      grads.push_back(ref(grad_flow.b1));
      grads.push_back(ref(grad_flow.w2));
      grads.push_back(ref(grad_flow.b2));
    }
    SgdOptions opt{poly_lr_from_config(st.cfg, iter), st.cfg.momentum,
                   st.cfg.weight_decay, st.cfg.clip_norm};
    sgd_step(params, grads, opt_state, opt);

    if (st.cfg.log_every > 0 && iter % st.cfg.log_every == 0)
      st.record.loss_log.push_back({t, iter, opt.lr, breakdown});
  }

  // Step boundary: trajectory snapshots, held-out evaluation, memory refresh.
  snapshot(st.bank, t, st.effective_tau[t], st.record.trajectories);
  {
    PrototypeBank probe_bank;
    for (int cls : schedule.classes_up_to(t)) {
      Vec mean(st.cfg.feat_dim, 0.0);
      const std::vector<Vec>& probes = st.probe_sets.at(cls);
      for (const Vec& x : probes) axpy(1.0, encode(st.encoder, x), mean);
      probe_bank.prototypes[cls] = scale(mean, 1.0 / probes.size());
    }
    snapshot(probe_bank, t, st.effective_tau[t], st.record.probe_trajectories);
  }
  evaluate_step(st, t);

  ModelSnapshot ckpt;
  ckpt.step = t;
  ckpt.encoder = st.encoder;
  ckpt.head = st.head;
  if (st.sw.use_flow_field) ckpt.flow = st.flow;
  st.record.checkpoints.push_back(std::move(ckpt));

  if (st.sw.use_memory) {
    const std::vector<Sample>& candidates = st.train_data[t];
    std::vector<Vec> features;
    if (st.cfg.memory_strategy == MemoryStrategy::kHerding) {
      features.reserve(candidates.size());
      for (const Sample& s : candidates) features.push_back(encode(st.encoder, s.x));
    }
    Rng rng_mem = st.master.split(4000 + t);
    memory_update(st.memory, candidates,
                  st.cfg.memory_strategy == MemoryStrategy::kHerding ? &features
                                                                     : nullptr,
                  rng_mem);
    for (const auto& [cls, stored] : st.memory.store)
      if (static_cast<int>(stored.size()) > st.memory.budget_per_class)
        throw StateError("run_step: memory budget exceeded");
  }
}

}  // namespace

MetricsBundle compute_metrics(const RunRecord& record) {
  MetricsBundle m;
  const int t_final = record.schedule.horizon();

  for (const auto& [cls, tc] : record.first_step) {
    ClassSummary s;
    s.class_id = cls;
    s.first_step = tc;
    std::vector<double> iou_hist, risks;
    for (int t = tc; t <= t_final; ++t) {
      iou_hist.push_back(record.iou_history[t].at(cls));
      const double acc = record.acc_history[t].at(cls);
      risks.push_back(std::clamp(1.0 - acc, 0.0, 1.0));
    }
    s.final_iou = iou_hist.back();
    s.best_iou = *std::max_element(iou_hist.begin(), iou_hist.end());
    s.forgetting = per_class_forgetting(iou_hist);
    s.regret = dynamic_regret(risks);
    s.final_accuracy = record.acc_history[t_final].at(cls);

    const TrajectoryMap& source = record.probe_trajectories.empty()
                                      ? record.trajectories
                                      : record.probe_trajectories;
    if (auto it = source.find(cls); it != source.end()) {
      std::vector<Vec> pts;
      for (const TrajectoryPoint& p : it->second.points) {
        if (norm2(p.mu) > 1e-9) pts.push_back(normalized(p.mu));
      }
      if (pts.size() >= 3) s.mean_curvature = geometry(pts).mean_curvature;
    }
    m.per_class.push_back(s);
  }

  double sum_all = 0.0, sum_old = 0.0, sum_new = 0.0;
  int n_old = 0, n_new = 0;
  for (const ClassSummary& s : m.per_class) {
    sum_all += s.final_iou;
    if (s.first_step == 0) {
      sum_old += s.final_iou;
      ++n_old;
    } else {
      sum_new += s.final_iou;
      ++n_new;
    }
  }
  const int n_all = static_cast<int>(m.per_class.size());
  m.miou_all = n_all > 0 ? sum_all / n_all : 0.0;
  m.miou_old = n_old > 0 ? sum_old / n_old : 0.0;
  m.miou_new = n_new > 0 ? sum_new / n_new : 0.0;

  const OaF1 of = oa_f1(record.final_confusion);
  m.oa = of.oa;
  m.mf1 = of.mf1;

  m.forgetting = forgetting_score(record.iou_history, record.first_step, false);
  m.forgetting_all = forgetting_score(record.iou_history, record.first_step, true);

  std::vector<double> xs, ys;
  for (const ClassSummary& s : m.per_class)
    if (s.mean_curvature) {
      xs.push_back(*s.mean_curvature);
      ys.push_back(s.forgetting);
    }
  if (xs.size() >= 2) m.pearson_curv_forget = pearson(xs, ys);

  if (!record.final_prototypes.empty()) {
    const AngleReport angles = prototype_angles(record.final_prototypes);
    m.min_cos_margin = angles.min_margin;
    m.angle_pairs = angles.pairs;
  }
  return m;
}

RunRecord run_experiment(const TaskSchedule& schedule, const TrainConfig& cfg) {
  schedule.validate();
  const auto t0 = std::chrono::steady_clock::now();

  TrainerState st(cfg.seed);
  st.schedule = &schedule;
  st.cfg = cfg;
  st.sw = resolve_variant(cfg.variant, cfg.weights);
  st.first_step = schedule.first_step();

  st.record.seed = cfg.seed;
  st.record.variant = cfg.variant;
  st.record.switches = st.sw;
  st.record.schedule = schedule;
  st.record.config = cfg;
  st.record.first_step = st.first_step;
  st.record.iou_history.resize(schedule.num_steps());
  st.record.acc_history.resize(schedule.num_steps());

  // Materialize the stream; optional acquisition-time shuffle spans all steps.
  st.train_data.resize(schedule.num_steps());
  for (int t = 0; t < schedule.num_steps(); ++t) {
    Rng rng = st.master.split(1000 + t);
    st.train_data[t] = sample_step(schedule, t, schedule.samples_per_step, rng);
  }
  st.effective_tau = schedule.timestamps;
  if (cfg.time_shuffle_alpha > 0.0) {
    std::vector<Sample> flat;
    for (const auto& step : st.train_data)
      flat.insert(flat.end(), step.begin(), step.end());
    Rng rng = st.master.split(1500);
    time_shuffle(flat, cfg.time_shuffle_alpha, rng);
    std::size_t off = 0;
    for (auto& step : st.train_data)
      for (Sample& s : step) s.timestamp = flat[off++].timestamp;
    for (int t = 0; t < schedule.num_steps(); ++t) {
      double mean = 0.0;
      for (const Sample& s : st.train_data[t]) mean += s.timestamp;
      st.effective_tau[t] = mean / st.train_data[t].size();
    }
  }

  // Fixed probe inputs per class (introduction-time distribution); their
  // re-encoded means trace how each class's representation moves.
  for (const auto& [cls, tc] : st.first_step) {
    Rng rng = st.master.split(5000 + cls);
    const Vec mean = class_mean_at(schedule, cls, schedule.timestamps[tc]);
    st.probe_sets[cls] = sample_normal(rng, mean, schedule.noise_std, 64);
  }

  Rng rng_enc = st.master.split(1);
  st.encoder = make_encoder(schedule.raw_dim, cfg.encoder_hidden, cfg.feat_dim, rng_enc);
  if (st.sw.use_flow_field) {
    Rng rng_flow = st.master.split(2);
    st.flow = make_flow_field(cfg.feat_dim, cfg.flow_hidden, st.sw.use_time,
                              cfg.time_encoding, rng_flow);
  }
  st.bank.ema_alpha = cfg.ema_alpha;
  st.memory.budget_per_class = cfg.memory_budget;
  st.memory.strategy = cfg.memory_strategy;

  for (int t = 0; t < schedule.num_steps(); ++t) run_step(st, t);

  for (const auto& [cls, mu] : st.bank.prototypes)
    if (auto n = try_normalize(mu)) st.record.final_prototypes[cls] = *n;

  st.record.metrics = compute_metrics(st.record);
  st.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return st.record;
}

std::map<Variant, RunRecord> run_ablation_suite(const TaskSchedule& schedule,
                                                const TrainConfig& base, int threads) {
  const std::vector<Variant> variants = ablation_variants();
  std::vector<RunRecord> records(variants.size());
  parallel_for(variants.size(), threads, [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.variant = variants[i];
    records[i] = run_experiment(schedule, cfg);
  });
  std::map<Variant, RunRecord> out;
  for (std::size_t i = 0; i < variants.size(); ++i)
    out.emplace(variants[i], std::move(records[i]));
  return out;
}

std::vector<SweepCell> run_sweep(const TaskSchedule& schedule, const TrainConfig& base,
                                 const std::vector<double>& curve_grid,
                                 const std::vector<double>& sep_grid,
                                 const std::vector<std::uint64_t>& seeds,
                                 int threads) {
  if (curve_grid.empty() || sep_grid.empty() || seeds.empty())
    throw ArgumentError("run_sweep: empty grid or seed list");

  struct Job {
    std::size_t cell;
    std::uint64_t seed;
    double curve;
    double sep;
  };
  std::vector<SweepCell> cells;
  std::vector<Job> jobs;
  for (double lc : curve_grid)
    for (double ls : sep_grid) {
      SweepCell cell;
      cell.lambda_curve = lc;
      cell.lambda_sep = ls;
      cell.miou_all.resize(seeds.size());
      cell.forgetting.resize(seeds.size());
      for (std::size_t s = 0; s < seeds.size(); ++s)
        jobs.push_back({cells.size(), seeds[s], lc, ls});
      cells.push_back(std::move(cell));
    }

  std::vector<std::pair<double, double>> results(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t j) {
    TrainConfig cfg = base;
    cfg.weights.lambda_curve = jobs[j].curve;
    cfg.weights.lambda_sep = jobs[j].sep;
    cfg.seed = jobs[j].seed;
    const RunRecord rec = run_experiment(schedule, cfg);
    results[j] = {rec.metrics.miou_all, rec.metrics.forgetting.value_or(0.0)};
  });

  std::vector<std::size_t> filled(cells.size(), 0);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    SweepCell& cell = cells[jobs[j].cell];
    const std::size_t k = filled[jobs[j].cell]++;
    cell.miou_all[k] = results[j].first;
    cell.forgetting[k] = results[j].second;
  }
  for (SweepCell& cell : cells) {
    double sm = 0.0, sf = 0.0;
    for (std::size_t s = 0; s < cell.miou_all.size(); ++s) {
      sm += cell.miou_all[s];
      sf += cell.forgetting[s];
    }
    cell.miou_mean = sm / cell.miou_all.size();
    cell.forget_mean = sf / cell.forgetting.size();
  }
  return cells;
}

}  // namespace protoflow
