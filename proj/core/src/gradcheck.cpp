#include "protoflow/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <vector>

#include "protoflow/flowfield.hpp"
#include "protoflow/losses.hpp"
#include "protoflow/mlp.hpp"
#include "protoflow/model.hpp"
#include "protoflow/optim.hpp"
#include "protoflow/protobank.hpp"
#include "protoflow/rng.hpp"

namespace protoflow {

namespace {

double rel_err(double analytic, double fd) {
  const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-6});
  return std::abs(analytic - fd) / scale;
}

double max_rel_err(const Vec& analytic, const Vec& fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, rel_err(analytic[i], fd[i]));
  return worst;
}

Vec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

// Compare an analytic parameter gradient against finite differences of a
// scalar function over the flattened parameter vector.
double check_params(const std::function<double(const Vec&)>& f, const Vec& flat,
                    const Vec& analytic, double eps) {
  return max_rel_err(analytic, finite_diff_grad(f, flat, eps));
}

}  // namespace

GradCheckReport run_gradcheck_suite(int seeds, double eps, double tolerance) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckReport report;
  report.tolerance = tolerance;
  report.eps = eps;
  report.seeds = seeds;
  auto& err = report.max_rel_err;
  err["mlp_params"] = err["mlp_input"] = err["encoder_ce_end_to_end"] = 0.0;
  err["flow_field_params"] = err["flow_field_input"] = 0.0;
  err["ce_loss"] = err["kl_distill"] = err["curvature_loss"] = 0.0;
  err["separation_loss"] = err["flow_loss"] = err["normalize_chain"] = 0.0;

  for (int seed = 1; seed <= seeds; ++seed) {
    Rng rng(seed);
    const int in = 2 + static_cast<int>(rng.uniform_index(7));      // <= 8
    const int hidden = 2 + static_cast<int>(rng.uniform_index(7));
    const int out = 2 + static_cast<int>(rng.uniform_index(7));
    const int k = 2 + static_cast<int>(rng.uniform_index(4));       // classes <= 5

    // MLP parameter and input gradients.
    {
      Mlp2Params p = make_mlp2_kaiming(in, hidden, out, rng);
      const Vec x = random_vec(rng, in);
      const Vec gout = random_vec(rng, out);
      Mlp2Cache cache;
      mlp2_forward(p, x, &cache);
      Mlp2Params grad = make_mlp2(in, hidden, out);
      const Vec gin = mlp2_backward(p, cache, gout, grad);

      Mlp2Params probe = p;
      auto f_params = [&](const Vec& flat) {
        mlp2_unflatten(flat, probe);
        return dot(mlp2_forward(probe, x), gout);
      };
      err["mlp_params"] = std::max(
          err["mlp_params"], check_params(f_params, mlp2_flatten(p), mlp2_flatten(grad), eps));

      auto f_input = [&](const Vec& xi) { return dot(mlp2_forward(p, xi), gout); };
      err["mlp_input"] =
          std::max(err["mlp_input"], max_rel_err(gin, finite_diff_grad(f_input, x, eps)));
    }

    // Cross-entropy through encoder + head, gradient w.r.t. encoder params.
    {
      Rng r2 = rng.split(11);
      Encoder enc = make_encoder(in, hidden, std::max(2, out), r2);
      Head head;
      std::vector<int> classes(k);
      for (int c = 0; c < k; ++c) classes[c] = c;
      grow_head(head, classes, enc.feat_dim(), 0.05, r2);

      const int batch = 3;
      std::vector<Vec> xs;
      std::vector<std::size_t> labels;
      for (int b = 0; b < batch; ++b) {
        xs.push_back(random_vec(r2, in));
        labels.push_back(r2.uniform_index(k));
      }

      auto forward_loss = [&](const Encoder& e) {
        std::vector<Vec> lg;
        for (const Vec& x : xs) lg.push_back(logits(head, encode(e, x)));
        return ce_loss(lg, labels);
      };

      Mlp2Params grad = make_mlp2(in, hidden, enc.feat_dim());
      Head grad_head = make_grad_head(head);
      std::vector<Vec> lg(batch);
      std::vector<Mlp2Cache> caches(batch);
      for (int b = 0; b < batch; ++b)
        lg[b] = logits(head, encode(enc, xs[b], &caches[b]));
      std::vector<Vec> grad_lg;
      ce_loss(lg, labels, &grad_lg);
      for (int b = 0; b < batch; ++b) {
        const Vec gfeat = logits_backward(head, mlp2_forward(enc.params, xs[b]),
                                          grad_lg[b], grad_head);
        encode_backward(enc, caches[b], gfeat, grad);
      }

      Encoder probe = enc;
      auto f = [&](const Vec& flat) {
        mlp2_unflatten(flat, probe.params);
        return forward_loss(probe);
      };
      err["encoder_ce_end_to_end"] =
          std::max(err["encoder_ce_end_to_end"],
                   check_params(f, mlp2_flatten(enc.params), mlp2_flatten(grad), eps));
    }

    // Flow field gradients w.r.t. phi and mu.
    {
      Rng r3 = rng.split(12);
      TimeEncodingConfig te;
      te.d_tau = 4;
      FlowField field = make_flow_field(in, hidden, true, te, r3);
      const Vec mu = random_vec(r3, in);
      const Vec enc_t = encode_time(te, 0.4, 0.0, 1.0);
      const Vec gout = random_vec(r3, in);

      Mlp2Cache cache;
      predict_velocity(field, mu, enc_t, &cache);
      Mlp2Params grad = make_mlp2(field.params.in_dim(), hidden, in);
      const Vec gmu = predict_velocity_backward(field, cache, gout, grad);

      FlowField probe = field;
      auto f_params = [&](const Vec& flat) {
        mlp2_unflatten(flat, probe.params);
        return dot(predict_velocity(probe, mu, enc_t), gout);
      };
      err["flow_field_params"] = std::max(
          err["flow_field_params"],
          check_params(f_params, mlp2_flatten(field.params), mlp2_flatten(grad), eps));

      auto f_mu = [&](const Vec& m) { return dot(predict_velocity(field, m, enc_t), gout); };
      err["flow_field_input"] = std::max(
          err["flow_field_input"], max_rel_err(gmu, finite_diff_grad(f_mu, mu, eps)));
    }

    // Loss gradients on random instances.
    {
      Rng r4 = rng.split(13);
      const int batch = 4;

      std::vector<Vec> lg, tg;
      std::vector<std::size_t> labels;
      for (int b = 0; b < batch; ++b) {
        lg.push_back(random_vec(r4, k));
        tg.push_back(random_vec(r4, k));
        labels.push_back(r4.uniform_index(k));
      }

      {
        std::vector<Vec> grads;
        ce_loss(lg, labels, &grads);
        for (int b = 0; b < batch; ++b) {
          auto f = [&](const Vec& l) {
            std::vector<Vec> probe = lg;
            probe[b] = l;
            return ce_loss(probe, labels);
          };
          err["ce_loss"] = std::max(err["ce_loss"],
                                    max_rel_err(grads[b], finite_diff_grad(f, lg[b], eps)));
        }
      }

      {
        std::vector<std::size_t> old_rows;
        for (int c = 0; c + 1 < k; ++c) old_rows.push_back(c);
        std::vector<Vec> grads;
        kl_distill(tg, lg, 2.0, old_rows, &grads);
        for (int b = 0; b < batch; ++b) {
          auto f = [&](const Vec& l) {
            std::vector<Vec> probe = lg;
            probe[b] = l;
            return kl_distill(tg, probe, 2.0, old_rows);
          };
          err["kl_distill"] = std::max(
              err["kl_distill"], max_rel_err(grads[b], finite_diff_grad(f, lg[b], eps)));
        }
      }

      {
        std::vector<CurvatureTriple> triples;
        for (int c = 0; c < 3; ++c)
          triples.push_back(
              {random_vec(r4, in), random_vec(r4, in), random_vec(r4, in)});
        std::vector<Vec> grads;
        curvature_loss(triples, &grads);
        for (std::size_t c = 0; c < triples.size(); ++c) {
          auto f = [&](const Vec& x) {
            std::vector<CurvatureTriple> probe = triples;
            probe[c].newest = x;
            return curvature_loss(probe);
          };
          err["curvature_loss"] =
              std::max(err["curvature_loss"],
                       max_rel_err(grads[c], finite_diff_grad(f, triples[c].newest, eps)));
        }
      }

      {
        // Prototypes close enough that some hinges are active.
        std::vector<Vec> protos;
        for (int c = 0; c < k; ++c) protos.push_back(random_vec(r4, in, 0.3));
        std::vector<Vec> grads;
        separation_loss(protos, 0.8, &grads);
        for (int c = 0; c < k; ++c) {
          auto f = [&](const Vec& p) {
            std::vector<Vec> probe = protos;
            probe[c] = p;
            return separation_loss(probe, 0.8);
          };
          err["separation_loss"] = std::max(
              err["separation_loss"],
              max_rel_err(grads[c], finite_diff_grad(f, protos[c], eps)));
        }
      }

      {
        std::vector<Vec> pred, obs;
        for (int c = 0; c < 3; ++c) {
          pred.push_back(random_vec(r4, in));
          obs.push_back(random_vec(r4, in));
        }
        std::vector<Vec> gp, go;
        flow_loss(pred, obs, &gp, &go);
        for (int c = 0; c < 3; ++c) {
          auto fp = [&](const Vec& p) {
            std::vector<Vec> probe = pred;
            probe[c] = p;
            return flow_loss(probe, obs);
          };
          err["flow_loss"] = std::max(
              err["flow_loss"], max_rel_err(gp[c], finite_diff_grad(fp, pred[c], eps)));
          auto fo = [&](const Vec& o) {
            std::vector<Vec> probe = obs;
            probe[c] = o;
            return flow_loss(pred, probe);
          };
          err["flow_loss"] = std::max(
              err["flow_loss"], max_rel_err(go[c], finite_diff_grad(fo, obs[c], eps)));
        }
      }

      {
        // Pullback through L2 normalization: f(v) = <normalized(v), g>.
        const Vec v = add(random_vec(r4, in), Vec(in, 1.5));
        const Vec g = random_vec(r4, in);
        const Vec analytic = normalize_backward(v, g);
        auto f = [&](const Vec& vv) { return dot(normalized(vv), g); };
        err["normalize_chain"] = std::max(
            err["normalize_chain"], max_rel_err(analytic, finite_diff_grad(f, v, eps)));
      }
    }
  }

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace protoflow
