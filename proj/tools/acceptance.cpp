// SPDX-License-Identifier: Apache-2.0
// Acceptance report: one [PASS]/[FAIL] line per criterion.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <CLI11.hpp>

#include "tolebi/estimator/estimator.hpp"
#include "tolebi/estimator/fault_rig.hpp"
#include "tolebi/eval/harness.hpp"
#include "tolebi/eval/metrics.hpp"
#include "tolebi/eval/report.hpp"
#include "tolebi/fault/fault.hpp"
#include "tolebi/gait/gait.hpp"
#include "tolebi/nn/gaussian.hpp"
#include "tolebi/nn/gru.hpp"
#include "tolebi/nn/mlp.hpp"
#include "tolebi/reward/reward.hpp"
#include "tolebi/train/ablation.hpp"
#include "tolebi/train/curriculum.hpp"
#include "tolebi/train/observation.hpp"
#include "tolebi/train/pendulum.hpp"
#include "tolebi/train/trainer.hpp"

#ifndef TOLEBI_CONFIG_DIR
#define TOLEBI_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace tolebi;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " FAILED(" << what << ")";
    }
  }
};

struct Options {
  fs::path out;
  fs::path ac9_config;
  bool reuse = false;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

Eigen::VectorXd random_vector(RngStream& rng, long n, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (long i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

Eigen::MatrixXd random_matrix(RngStream& rng, long r, long c) {
  Eigen::MatrixXd m(r, c);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

template <typename Loss>
Eigen::VectorXd central_difference(Eigen::VectorXd& x, Loss loss, double eps = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (long i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = loss();
    x[i] = keep - eps;
    const double down = loss();
    x[i] = keep;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

double worst_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double w = 0.0;
  for (long i = 0; i < a.size(); ++i) w = std::max(w, rel_error(a[i], b[i]));
  return w;
}

// ---- AC1 ---------------------------------------------------------------------

void masking(Outcome& o, const Options&) {
  const sim::RobotModel base = sim::RobotModel::planar_biped();
  const int J = base.joint_count();
  RngStream rng(101, 0);
  long checked = 0;
  double worst_pd = 0.0;
  for (int i = 0; i < 10000; ++i) {
    sim::RobotModel m = base;
    for (int j = 0; j < J; ++j) {
      m.kp[j] = rng.uniform(0.0, 400.0);
      m.kd[j] = rng.uniform(0.0, 20.0);
    }
    const auto type = rng.bernoulli(0.5) ? fault::FaultType::JointLocking : fault::FaultType::PowerLoss;
    const int joint = static_cast<int>(rng.uniform_index(J));
    auto sc = fault::FaultScenario::make(type, joint, rng.uniform(0.0, 5.0));
    const double q0 = rng.uniform(-1.5, 1.5);
    if (type == fault::FaultType::JointLocking) sc.locked_position = q0;
    const Eigen::VectorXd tau = random_vector(rng, J, 40.0), q = random_vector(rng, J), qd = random_vector(rng, J, 5.0);
    const double t = rng.uniform(0.0, 10.0);
    const Eigen::VectorXd out = fault::mask_torque(tau, sc, q, qd, m, t);
    const bool active = t >= sc.onset;
    for (int j = 0; j < J; ++j) {
      if (!active || j != joint) {
        o.require(out[j] == tau[j], "untouched joint changed");
      } else if (type == fault::FaultType::PowerLoss) {
        o.require(out[j] == 0.0, "power loss torque not zero");
      } else {
        const double pd = m.kp[j] * (q0 - q[j]) - m.kd[j] * qd[j];
        worst_pd = std::max(worst_pd, std::abs(out[j] - pd));
      }
    }
    ++checked;
  }
  o.require(worst_pd <= 1e-12, "lock PD error");
  o.detail << checked << " random cases, worst lock PD error " << worst_pd;
}

// ---- AC2 ---------------------------------------------------------------------

void sampling(Outcome& o, const Options&) {
  const int J = 6, n = 100000;
  fault::FaultConfig cfg;
  cfg.probability = 0.9;
  RngStream rng(202, 0);
  int healthy = 0, locking = 0;
  std::vector<int> per_joint(J, 0);
  for (int i = 0; i < n; ++i) {
    const auto s = fault::sample_scenario(rng, J, cfg, 32.0);
    if (s.healthy()) {
      ++healthy;
      continue;
    }
    locking += s.type == fault::FaultType::JointLocking;
    ++per_joint[s.joint];
  }
  const int faults = n - healthy;
  const double hf = double(healthy) / n, lf = double(locking) / faults;
  double chi2 = 0.0;
  const double e = faults / double(J);
  for (int c : per_joint) chi2 += (c - e) * (c - e) / e;
  const double critical = boost::math::quantile(boost::math::chi_squared(J - 1), 0.99);
  o.require(std::abs(hf - 0.10) <= 0.01, "healthy fraction");
  o.require(std::abs(lf - 0.50) <= 0.01, "lock/power split");
  o.require(chi2 < critical, "joint uniformity");
  o.detail << "healthy " << hf << ", locking share " << lf << ", chi2 " << chi2 << " < " << critical;
}

// ---- AC3 ---------------------------------------------------------------------

// Scalar re-evaluation of every term straight from the table, no Eigen.
struct OracleInputs {
  double vx_cmd, vy_cmd, vx, vy, w_cmd, w;
  bool contact_left, contact_right;
  int scheduled;  // 0 DSP, 1 RSSP (left swings), 2 LSSP (right swings)
  double roll, pitch;
  double tau[6], tau_prev[6], qd[6], qdd[6], q[6], q_ref[6];
  double fz[2], fz_prev[2], fz_ref[2];
  double weight;
  bool terminated;
};

std::vector<double> oracle_terms(const OracleInputs& x) {
  auto sq = [](double v) { return v * v; };
  auto norm6 = [](const double* a) {
    double s = 0.0;
    for (int i = 0; i < 6; ++i) s += a[i] * a[i];
    return std::sqrt(s);
  };
  double dtau[6], dq[6];
  for (int i = 0; i < 6; ++i) {
    dtau[i] = x.tau[i] - x.tau_prev[i];
    dq[i] = x.q_ref[i] - x.q[i];
  }
  bool sync = false;
  if (x.scheduled == 0) sync = x.contact_left && x.contact_right;
  if (x.scheduled == 1) sync = !x.contact_left && x.contact_right;
  if (x.scheduled == 2) sync = x.contact_left && !x.contact_right;
  double excess = 0.0, dfz = 0.0, track = 0.0;
  for (int i = 0; i < 2; ++i) {
    excess += std::max(0.0, x.fz[i] - 1.4 * x.weight);
    dfz += std::abs(x.fz[i] - x.fz_prev[i]);
    track += std::abs(x.fz_ref[i] - x.fz[i]);
  }
  const double q_err = norm6(dq);
  return {std::exp(-(sq(x.vx_cmd - x.vx) + sq(x.vy_cmd - x.vy)) / (0.45 * 0.45)),
          std::exp(-sq(x.w_cmd - x.w) / (0.35 * 0.35)),
          sync ? 1.0 : 0.0,
          std::exp(-500.0 * (sq(x.roll) + sq(x.pitch))),
          std::exp(-norm6(x.tau) / 100.0),
          std::exp(-norm6(x.qd) / 100.0),
          std::exp(-norm6(x.qdd) / 0.05),
          std::exp(-excess / 140.0),
          std::exp(-norm6(dtau) / (1.2 * 1.2)),
          std::exp(-dfz / 100.0),
          std::exp(-q_err * q_err / 0.5),
          std::exp(-track / 10.0),
          x.terminated ? 1.0 : 0.0};
}

void rewards(Outcome& o, const Options&) {
  // Weights as printed: nominal column, then the fault column.
  const double nominal[] = {0.4, 0.2, 0.2, 0.3, 0.05, 0.05, 0.05, 0.1, 0.7, 0.2, 0.35, 0.0, 0.0};
  const double fault_w[] = {0.4, 0.2, 0.2, 0.3, 0.05, 0.05, 0.05, 0.1, 0.7, 0.2, 0.35, 0.3, -100.0};
  const auto wn = reward::RewardWeights::nominal(), wf = reward::RewardWeights::fault();
  int differ = 0;
  for (int i = 0; i < reward::kTermCount; ++i) {
    o.require(wn[i] == nominal[i] && wf[i] == fault_w[i], std::string("weight ") + reward::kTermNames[i]);
    differ += wn[i] != wf[i];
  }
  o.require(differ == 2, "presets differ in two entries");

  RngStream rng(303, 0);
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    OracleInputs x{};
    const double W = rng.uniform(100.0, 1000.0);
    x.weight = W;
    x.vx_cmd = rng.uniform(-0.5, 1.0);
    x.vy_cmd = rng.uniform(-0.3, 0.3);
    x.vx = x.vx_cmd + 0.3 * rng.normal();
    x.vy = x.vy_cmd + 0.3 * rng.normal();
    x.w_cmd = 0.3 * rng.normal();
    x.w = x.w_cmd + 0.3 * rng.normal();
    x.roll = 0.05 * rng.normal();
    x.pitch = 0.05 * rng.normal();
    for (int j = 0; j < 6; ++j) {
      x.tau[j] = 20 * rng.normal();
      x.tau_prev[j] = x.tau[j] + 0.5 * rng.normal();
      x.qd[j] = 3 * rng.normal();
      x.qdd[j] = 0.005 * rng.normal();
      x.q[j] = rng.normal();
      x.q_ref[j] = x.q[j] + 0.3 * rng.normal();
    }
    for (int i = 0; i < 2; ++i) {
      x.fz[i] = rng.uniform(0.0, 2.0) * W;
      x.fz_prev[i] = x.fz[i] + 20 * rng.normal();
      x.fz_ref[i] = x.fz[i] + 5 * rng.normal();
    }
    x.contact_left = x.fz[0] > 0.05 * W;
    x.contact_right = x.fz[1] > 0.05 * W;
    x.scheduled = static_cast<int>(rng.uniform_index(3));
    x.terminated = rng.bernoulli(0.1);

    reward::RewardInputs in;
    in.v_cmd = {x.vx_cmd, x.vy_cmd};
    in.v_base = {x.vx, x.vy};
    in.w_cmd = x.w_cmd;
    in.w_base = x.w;
    in.contact = reward::contact_pattern(x.fz[0], x.fz[1], W);
    in.scheduled = static_cast<gait::SupportPhase>(x.scheduled);
    in.roll = x.roll;
    in.pitch = x.pitch;
    in.tau = Eigen::Map<Eigen::VectorXd>(x.tau, 6);
    in.tau_prev = Eigen::Map<Eigen::VectorXd>(x.tau_prev, 6);
    in.qd = Eigen::Map<Eigen::VectorXd>(x.qd, 6);
    in.qdd = Eigen::Map<Eigen::VectorXd>(x.qdd, 6);
    in.q = Eigen::Map<Eigen::VectorXd>(x.q, 6);
    in.q_ref = Eigen::Map<Eigen::VectorXd>(x.q_ref, 6);
    in.fz = {x.fz[0], x.fz[1]};
    in.fz_prev = {x.fz_prev[0], x.fz_prev[1]};
    in.fz_ref = {x.fz_ref[0], x.fz_ref[1]};
    in.weight = W;
    in.terminated = x.terminated;

    const std::vector<double> expect = oracle_terms(x);
    for (const auto& w : {wn, wf}) {
      const reward::RewardBreakdown b = reward::total_reward(in, w);
      double total = 0.0;
      for (int i = 0; i < reward::kTermCount; ++i) {
        worst = std::max(worst, std::abs(b.raw[i] - expect[i]));
        total += w[i] * expect[i];
        if (i != reward::kFootContact && i != reward::kTermination)
          o.require(b.raw[i] > 0.0 && b.raw[i] <= 1.0, "exponential term outside (0,1]");
      }
      worst = std::max(worst, std::abs(b.total - total));
    }
  }
  o.require(worst <= 1e-10, "oracle mismatch");

  // Maxima: sum of the positive weights, reached with every term at 1 and no termination.
  double max_n = 0.0, max_f = 0.0;
  for (int i = 0; i < reward::kTermCount; ++i) {
    max_n += std::max(0.0, nominal[i]);
    max_f += std::max(0.0, fault_w[i]);
  }
  reward::RewardInputs best;
  best.contact = {true, true};
  best.tau = best.tau_prev = best.qd = best.qdd = Eigen::VectorXd::Zero(6);
  best.q = best.q_ref = Eigen::VectorXd::Zero(6);
  best.weight = 500.0;
  best.fz = best.fz_prev = best.fz_ref = {250.0, 250.0};
  const double got_n = reward::total_reward(best, wn).total, got_f = reward::total_reward(best, wf).total;
  o.require(std::abs(max_n - 2.60) < 1e-12 && std::abs(max_f - 2.90) < 1e-12, "derived maxima");
  o.require(std::abs(got_n - max_n) < 1e-12 && std::abs(got_f - max_f) < 1e-12, "assembled maxima");
  o.detail << "1000 random inputs x 2 presets, worst term error " << worst << ", maxima " << got_n << " / " << got_f;
}

// ---- AC4 ---------------------------------------------------------------------

void gradients(Outcome& o, const Options&) {
  RngStream rng(404, 0);
  double w_mlp = 0.0, w_gru = 0.0, w_gauss = 0.0, w_bce = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    // MLP, parameters and input.
    {
      nn::Mlp net({5, 8, 8, 3});
      net.init(rng);
      net.params() += 0.05 * random_matrix(rng, net.param_count(), 1);
      const Eigen::MatrixXd x = random_matrix(rng, 5, 4), target = random_matrix(rng, 3, 4);
      nn::Mlp::Cache cache;
      const Eigen::MatrixXd y = net.forward_batch(x, &cache);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
      net.backward_batch(cache, y - target, grad);
      const Eigen::VectorXd fd =
          central_difference(net.params(), [&] { return 0.5 * (net.forward_batch(x) - target).squaredNorm(); });
      w_mlp = std::max(w_mlp, worst_rel_error(grad, fd));
    }
    // GRU, 5-step unroll with a sigmoid/BCE readout.
    {
      nn::Gru cell(4, 6, 3);
      cell.init(rng);
      std::vector<Eigen::MatrixXd> xs, ys;
      for (int t = 0; t < 5; ++t) {
        xs.push_back(random_matrix(rng, 4, 2));
        ys.push_back((random_matrix(rng, 3, 2).array() > 0).cast<double>().matrix());
      }
      const Eigen::MatrixXd h0 = 0.5 * random_matrix(rng, 6, 2);
      auto run = [&](std::vector<nn::Gru::StepCache>* caches, std::vector<Eigen::MatrixXd>* dl) {
        Eigen::MatrixXd h = h0;
        double loss = 0.0;
        for (int t = 0; t < 5; ++t) {
          nn::Gru::StepCache c;
          const Eigen::MatrixXd p = nn::sigmoid(cell.step_batch(xs[t], h, caches ? &c : nullptr));
          loss -= (ys[t].array() * p.array().log() + (1 - ys[t].array()) * (1 - p.array()).log()).sum();
          if (caches) {
            caches->push_back(c);
            dl->push_back(p - ys[t]);
          }
        }
        return loss;
      };
      std::vector<nn::Gru::StepCache> caches;
      std::vector<Eigen::MatrixXd> dl;
      run(&caches, &dl);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(cell.param_count());
      cell.backward_sequence(caches, dl, grad);
      const Eigen::VectorXd fd = central_difference(cell.params(), [&] { return run(nullptr, nullptr); });
      w_gru = std::max(w_gru, worst_rel_error(grad, fd));
    }
    // Gaussian log-probability with respect to the mean.
    {
      Eigen::VectorXd sigma(4);
      for (int d = 0; d < 4; ++d) sigma[d] = rng.uniform(0.1, 3.0);
      const nn::GaussianHead head(sigma);
      Eigen::VectorXd mean = random_vector(rng, 4);
      const Eigen::VectorXd action = mean + random_vector(rng, 4);
      const Eigen::VectorXd g = head.grad_mean_batch(mean, action).col(0);
      const Eigen::VectorXd fd = central_difference(mean, [&] { return head.log_prob(mean, action); });
      w_gauss = std::max(w_gauss, worst_rel_error(g, fd));
    }
    // BCE with respect to the logits.
    {
      Eigen::VectorXd z = 2.0 * random_vector(rng, 7);
      Eigen::VectorXd label = Eigen::VectorXd::Zero(7);
      label[rng.uniform_index(7)] = 1.0;
      auto sig = [](const Eigen::VectorXd& v) { return nn::sigmoid(v).col(0).eval(); };
      const Eigen::VectorXd g = estimator::bce_loss_and_grad(sig(z), label).grad_logits;
      const Eigen::VectorXd fd =
          central_difference(z, [&] { return estimator::bce_loss_and_grad(sig(z), label).loss; }, 1e-6);
      w_bce = std::max(w_bce, worst_rel_error(g, fd));
    }
  }
  o.require(std::max({w_mlp, w_gru, w_gauss, w_bce}) < 1e-4, "relative error");
  o.detail << "20 instances each, worst relative error mlp " << w_mlp << ", gru " << w_gru << ", gaussian " << w_gauss
           << ", bce " << w_bce;
}

// ---- AC5 ---------------------------------------------------------------------

void phase_history(Outcome& o, const Options&) {
  RngStream rng(505, 0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    gait::PhaseState ps{rng.uniform(0.0, 1.0), rng.uniform(0.5, 2.0)};
    const double dt1 = rng.uniform(1e-4, 0.05), dt2 = rng.uniform(1e-4, 0.05);
    const gait::PhaseState one = gait::advance_phase(ps, dt1, 0.0, 0.05);
    const gait::PhaseState two = gait::advance_phase(one, dt2, 0.0, 0.05);
    const gait::PhaseState direct = gait::advance_phase(ps, dt1 + dt2, 0.0, 0.05);
    const double a = rng.uniform(-0.1, 0.1);
    const gait::PhaseState mod = gait::advance_phase(ps, dt1, a, 0.05);
    for (double p : {one.phase, two.phase, mod.phase}) o.require(p >= 0.0 && p < 1.0, "phase outside [0,1)");
    // Circular distance, so wrap-around at 1 counts as agreement.
    auto circ = [](double x, double y) {
      const double d = std::abs(x - y);
      return std::min(d, 1.0 - d);
    };
    const double expect_mod = std::fmod(ps.phase + dt1 / ps.period + std::clamp(a, -0.05, 0.05), 1.0);
    worst = std::max({worst, circ(two.phase, direct.phase), circ(mod.phase, expect_mod)});
  }
  o.require(worst < 1e-12, "composition");

  train::HistoryBuffer h(1, 10, 2);
  for (int t = 0; t < 50; ++t) h.push(Eigen::VectorXd::Constant(1, t));
  const std::vector<int> expect{0, 2, 4, 6, 8, 10, 12, 14, 16, 18};
  o.require(h.selected_ages() == expect, "selected ages");
  const Eigen::VectorXd s = h.stacked();
  for (int k = 0; k < 10; ++k) o.require(s[k] == 49 - expect[k], "stacked entry");
  o.detail << "1e5 random steps, worst composition error " << worst << ", ages {0,2,...,18}";
}

// ---- AC6 ---------------------------------------------------------------------

void curriculum(Outcome& o, const Options&) {
  using train::Stage;
  train::CurriculumController c({20.0, 24.0}, 0.0);
  std::vector<std::pair<double, Stage>> seq{{19.0, Stage::Nominal},        {19.0, Stage::Nominal},
                                            {20.5, Stage::FaultsEnabled},  {19.0, Stage::FaultsEnabled},
                                            {24.1, Stage::FaultsAndPush},  {10.0, Stage::FaultsAndPush}};
  bool preset_ok = true;
  Stage prev = c.stage();
  for (const auto& [len, want] : seq) {
    const Stage got = c.update(len);
    o.require(got == want, "transition at " + std::to_string(len));
    o.require(static_cast<int>(got) >= static_cast<int>(prev), "monotone");
    preset_ok = preset_ok && c.fault_rewards() == (got != Stage::Nominal);
    prev = got;
  }
  o.require(preset_ok, "preset switch");
  // One stage per tick even when both thresholds are exceeded at once.
  o.require(train::curriculum_tick(Stage::Nominal, 30.0) == Stage::FaultsEnabled, "single step");
  o.detail << "19 -> nominal, 20.5 -> faults, 24.1 -> faults+push, fault preset from the first transition";
}

// ---- AC7 ---------------------------------------------------------------------

void pendulum(Outcome& o, const Options&) {
  const train::PendulumTraining s;
  const double random = train::pendulum_random_return(50, s.seed);
  const train::ActorCritic ac = train::train_pendulum(s);
  const double trained = train::pendulum_mean_return(
      [&](const train::PendulumEnv& e) { return ac.mean(e.observation())[0]; }, 50, s.seed);
  o.require(trained >= 3.0 * random, "return ratio");
  o.detail << s.iterations << " iterations, mean return " << trained << " vs random " << random << " ("
           << trained / random << "x)";
}

// ---- AC8 ---------------------------------------------------------------------

void estimator_learning(Outcome& o, const Options&) {
  const sim::RobotModel model = sim::RobotModel::planar_biped();
  const estimator::FaultRig rig(model, estimator::RigConfig{});
  estimator::EstimatorConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.minibatch = 8;
  estimator::StatusEstimator est(model.joint_count(), cfg);
  RngStream init(1, 0), data(1, 1), shuffle(1, 2), held(99, 0);
  est.init(init);
  std::vector<estimator::RigEpisode> test;
  for (int i = 0; i < 40; ++i) test.push_back(rig.run(held));
  for (int it = 0; it < 500; ++it) {
    std::vector<estimator::RigEpisode> batch;
    for (int e = 0; e < 16; ++e) batch.push_back(rig.run(data));
    est.update(estimator::collect_windows(est, batch), shuffle);
  }
  double bce = 0.0;
  long n = 0;
  estimator::DetectionStats stats(model.joint_count());
  for (const auto& ep : test) {
    Eigen::VectorXd h = est.reset_state();
    for (std::size_t t = 0; t < ep.inputs.size(); ++t) {
      const auto e = est.estimate(ep.inputs[t], h);
      bce += estimator::bce_loss_and_grad(e.probability, ep.labels[t]).loss;
      ++n;
      stats.add(e.status, ep.labels[t]);
    }
  }
  bce /= n;
  double min_p = 1.0, min_r = 1.0;
  for (int j = 0; j < model.joint_count(); ++j) {
    min_p = std::min(min_p, stats.precision(j));
    min_r = std::min(min_r, stats.recall(j));
  }
  o.require(bce < 0.35, "held-out BCE");
  o.require(min_p >= 0.8 && min_r >= 0.8, "per-joint precision/recall");
  o.detail << "500 iterations, held-out BCE " << bce << " (chance " << std::numbers::ln2 << "), min precision "
           << min_p << ", min recall " << min_r;
}

// ---- AC9 ---------------------------------------------------------------------

std::vector<std::string> locking_scenarios() {
  std::vector<std::string> out;
  for (const auto& j : sim::RobotModel::planar_biped().joint_names()) out.push_back("lock_" + j);
  return out;
}

void fault_tolerance(Outcome& o, const Options& opt) {
  const auto t0 = Clock::now();
  const fs::path root = opt.out / "ac9";
  std::map<std::string, double> locking;
  for (const std::string v : {"full", "no_fault_training"}) {
    std::vector<std::string> ov = train::variant_overrides(v);
    ov.push_back("run.name=" + v);
    const train::TrainConfig cfg = train::load_config(opt.ac9_config.string(), ov);
    const fs::path dir = root / v;
    const fs::path latest = dir / "checkpoints" / "latest.bin";
    bool trained = false;
    if (opt.reuse && fs::exists(latest)) trained = train::load_bundle(latest).iteration >= cfg.ppo.iterations;
    if (!trained) {
      fs::remove_all(dir);
      train::Trainer trainer(cfg, dir);
      trainer.run();
    }
    std::string list = "[";
    for (const auto& s : locking_scenarios()) list += (list.size() > 1 ? ", " : "") + s;
    const train::PolicyBundle bundle = train::load_bundle(latest, {"eval.scenarios=" + list + "]"});
    const auto joints = sim::RobotModel::planar_biped().joint_names();
    const eval::EvalReport report =
        eval::run_success_eval(bundle, eval::scenario_grid(joints, bundle.config.eval, bundle.config.seed));
    eval::emit_report(dir / "eval", report, {{"variant", v}, {"iteration", bundle.iteration}});
    locking[v] = eval::fault_average(report, "joint_locking").success_rate;
  }
  const double elapsed = seconds_since(t0);
  const double gap = locking["full"] - locking["no_fault_training"];
  o.require(gap >= 0.2, "locking success gap");
  o.require(elapsed <= 7200.0, "2 h budget");
  o.detail << "joint-locking success full " << locking["full"] << " vs no_fault_training "
           << locking["no_fault_training"] << " (gap " << gap << "), trained and evaluated in " << elapsed / 60.0
           << " min; reports under " << root.string();
}

// ---- AC10 --------------------------------------------------------------------

void metric_identities(Outcome& o, const Options&) {
  const std::vector<double> cmd(101, 0.4);
  std::vector<double> under(cmd), alt(cmd);
  for (std::size_t i = 0; i < cmd.size(); ++i) {
    under[i] -= 0.1;
    alt[i] += i % 2 ? 0.1 : -0.1;
  }
  alt.pop_back();  // even length, so the mean error is exactly zero
  const auto c = eval::velocity_tracking_metrics(under, cmd);
  const auto a = eval::velocity_tracking_metrics(alt, std::vector<double>(alt.size(), 0.4));
  o.require(std::abs(c.rmse - 0.1) <= 1e-12 && std::abs(c.mbe + 0.1) <= 1e-12, "constant error");
  o.require(std::abs(a.rmse - 0.1) <= 1e-12 && std::abs(a.mbe) <= 1e-12, "alternating error");

  // Every trace of a short evaluation, plus random traces.
  train::PolicyBundle b;
  b.config = train::load_config("", {"policy.hidden=[16, 16]", "estimator.hidden=8", "eval.episodes=2",
                                     "eval.horizon=1.0", "eval.success_time=1.0", "eval.onset=0.3"});
  const sim::RobotModel model = sim::RobotModel::planar_biped();
  b.policy = train::make_policy(b.config, model);
  b.estimator = estimator::StatusEstimator(model.joint_count(), b.config.estimator);
  RngStream init(b.config.seed, 1);
  b.policy.init(init, 0.3);
  b.estimator.init(init);
  long traces = 0;
  for (const auto& sc : eval::scenario_grid(model.joint_names(), b.config.eval, 1))
    for (int k = 0; k < sc.episodes; ++k) {
      const eval::EpisodeResult r = eval::run_episode(b, sc, k, false);
      for (const auto* tr : {&r.linear, &r.angular}) {
        const auto m = tr->metrics();
        o.require(m.rmse + 1e-15 >= std::abs(m.mbe), "RMSE < |MBE| on an evaluated trace");
        ++traces;
      }
    }
  RngStream rng(1010, 0);
  for (int i = 0; i < 10000; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_index(40));
    std::vector<double> v, w;
    const double bias = rng.normal();
    for (int k = 0; k < n; ++k) {
      v.push_back(rng.normal(bias, rng.uniform(0.0, 1.0)));
      w.push_back(rng.normal());
    }
    const auto m = eval::velocity_tracking_metrics(v, w);
    o.require(m.rmse + 1e-15 >= std::abs(m.mbe), "RMSE < |MBE| on a random trace");
  }
  o.detail << traces << " evaluated traces and 1e4 random traces satisfy RMSE >= |MBE|; closed forms exact";
}

// ---- AC11 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void determinism(Outcome& o, const Options& opt) {
  const fs::path root = opt.out / "ac11";
  fs::remove_all(root);
  const std::vector<std::string> small{"env.num_envs=2",         "ppo.steps_per_env=64",   "ppo.minibatch=32",
                                       "policy.hidden=[32, 32]", "estimator.hidden=16",    "ppo.iterations=6",
                                       "logging.checkpoint_every=3", "curriculum.threshold_fault=0.05",
                                       "curriculum.threshold_push=0.1"};
  const train::TrainConfig cfg = train::load_config("", small);

  // Checkpoint round trip.
  train::Trainer a(cfg, root / "straight");
  a.run(3);
  const nn::Checkpoint ck = a.checkpoint();
  const nn::Checkpoint back = nn::Checkpoint::decode(ck.encode());
  train::Trainer restored(cfg, root / "restored");
  restored.restore(back);
  o.require(restored.checkpoint().encode() == ck.encode(), "checkpoint round trip");

  // Resume against an uninterrupted run.
  a.run(6);
  {
    train::Trainer half(cfg, root / "resumed");
    half.run(3);
  }
  train::Trainer resumed(cfg, root / "resumed");
  resumed.restore(nn::Checkpoint::load(root / "resumed" / "checkpoints" / "latest.bin"));
  resumed.run(6);
  o.require(slurp(root / "straight" / "metrics.csv") == slurp(root / "resumed" / "metrics.csv"), "resumed metrics");
  o.require(slurp(root / "straight" / "checkpoints" / "latest.bin") ==
                slurp(root / "resumed" / "checkpoints" / "latest.bin"),
            "resumed checkpoint");

  // Two evaluations of the same checkpoint.
  const std::vector<std::string> ev{"eval.episodes=2", "eval.horizon=1.0", "eval.success_time=1.0", "eval.onset=0.3",
                                    "eval.scenarios=[healthy, lock_l_knee_pitch, power_r_ankle_pitch]"};
  for (const char* run : {"eval_a", "eval_b"}) {
    const train::PolicyBundle b = train::load_bundle(root / "straight" / "checkpoints" / "latest.bin", ev);
    const auto report = eval::run_success_eval(
        b, eval::scenario_grid(sim::RobotModel::planar_biped().joint_names(), b.config.eval, b.config.seed));
    eval::emit_report(root / run, report, {{"seed", b.config.seed}});
  }
  for (const char* f : {"report.csv", "summary.csv", "traces.jsonl"})
    o.require(slurp(root / "eval_a" / f) == slurp(root / "eval_b" / f), std::string("eval ") + f);
  o.detail << "round trip, 3+3 resume vs 6 straight iterations, and repeated evaluation all byte-identical";
}

struct Criterion {
  std::string id;
  std::string title;
  double limit_s;  // runtime bound from the criterion; <= 0 when none
  std::function<void(Outcome&, const Options&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance report: prints one [PASS]/[FAIL] line per criterion"};
  std::vector<std::string> only;
  Options opt;
  bool strict = false;
  std::string out, ac9 = std::string(TOLEBI_CONFIG_DIR) + "/desk.yaml";
  app.add_option("--only", only, "Criterion id (AC1..AC11); repeatable");
  app.add_option("--out", out, "Scratch and report directory (default: $TOLEBI_OUT_ROOT/acceptance or runs/acceptance)");
  app.add_option("--ac9-config", ac9, "Training config for the fault-tolerance comparison");
  app.add_flag("--reuse", opt.reuse, "Reuse finished AC9 training runs found in the output directory");
  app.add_flag("--strict", strict, "Exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  if (out.empty()) {
    const char* r = std::getenv("TOLEBI_OUT_ROOT");
    out = (fs::path(r && *r ? r : "runs") / "acceptance").string();
  }
  opt.out = out;
  opt.ac9_config = ac9;
  fs::create_directories(opt.out);

  const std::vector<Criterion> all{
      {"AC1", "masking correctness", 1.0, masking},
      {"AC2", "scenario-sampling statistics", 5.0, sampling},
      {"AC3", "reward-bank fidelity", 5.0, rewards},
      {"AC4", "gradient correctness", 30.0, gradients},
      {"AC5", "phase and history contracts", 5.0, phase_history},
      {"AC6", "curriculum gating", 1.0, curriculum},
      {"AC7", "PPO sanity on the pendulum", 300.0, pendulum},
      {"AC8", "estimator learnability", 900.0, estimator_learning},
      {"AC9", "directional fault-tolerance result", 0.0, fault_tolerance},
      {"AC10", "metric identities", 1.0, metric_identities},
      {"AC11", "determinism and persistence", 120.0, determinism},
  };
  const std::set<std::string> wanted(only.begin(), only.end());
  for (const auto& id : wanted)
    if (std::none_of(all.begin(), all.end(), [&](const Criterion& c) { return c.id == id; })) {
      std::cerr << "unknown criterion " << id << '\n';
      return 2;
    }

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      c.run(o, opt);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " error: " << e.what();
    }
    const double s = seconds_since(t0);
    if (c.limit_s > 0.0 && s >= c.limit_s) {
      o.pass = false;
      o.detail << " FAILED(runtime over " << c.limit_s << " s)";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.id << ' ' << c.title << ": " << o.detail.str() << " ["
              << std::fixed << std::setprecision(2) << s << " s]" << std::defaultfloat << std::endl;
  }
  return strict && failed ? 1 : 0;
}
