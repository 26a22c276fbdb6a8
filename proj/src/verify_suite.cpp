/*
 * Copyright 2026 The richbll Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "richbll/verify_suite.hpp"

#include "richbll/backbone.hpp"
#include "richbll/gp_posterior.hpp"
#include "richbll/ntk_features.hpp"
#include "richbll/seed.hpp"
#include "richbll/transform.hpp"
#include "richbll/version.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

namespace richbll {

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

using Clock = std::chrono::steady_clock;

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(3) << v;
  return s.str();
}

DenseMatrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  DenseMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

template <typename Fn>
GateResult timed(const std::string& name, bool hard, Fn&& body) {
  const auto t0 = Clock::now();
  GateResult g = body();
  g.name = name;
  g.hard = hard;
  g.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return g;
}

// Random low-dimensional feature instance for the equivalence and dominance gates.
struct Instance {
  DenseMatrix phi_r;       // N x r, last column ones
  DenseMatrix phi_m;       // N x m
  DenseMatrix phi_r_test;  // N' x r
  double noise_var = 1.0;
};

Instance make_instance(std::uint64_t seed, int index) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  const Eigen::Index r = std::uniform_int_distribution<Eigen::Index>(2, 10)(rng);
  const Eigen::Index n = std::uniform_int_distribution<Eigen::Index>(r + 1, 50)(rng);
  const Eigen::Index m = std::uniform_int_distribution<Eigen::Index>(1, 200)(rng);
  const Eigen::Index n_test = std::uniform_int_distribution<Eigen::Index>(1, 8)(rng);
  constexpr std::array<double, 3> kNoise{0.01, 0.1, 1.0};

  Instance inst;
  inst.noise_var = kNoise[static_cast<std::size_t>(index) % kNoise.size()];
  const std::uint64_t base = rng();
  inst.phi_r = gaussian(n, r, base);
  inst.phi_r.col(r - 1).setOnes();
  inst.phi_r_test = gaussian(n_test, r, base + 1);
  inst.phi_r_test.col(r - 1).setOnes();
  const DenseMatrix w = gaussian(r, m, base + 2) / std::sqrt(static_cast<double>(r));
  inst.phi_m = inst.phi_r * w + 0.3 * gaussian(n, m, base + 3);
  return inst;
}

FeatureBundle exact_bundle(const DenseMatrix& phi_r, const DenseMatrix& phi_m) {
  FeatureBundle b;
  b.phi_r = phi_r;
  b.hidden = ExactHidden{phi_m};
  for (Eigen::Index i = 0; i < phi_r.rows(); ++i) b.source_rows.push_back(i);
  return b;
}

// Kernel-space S^B in extended precision, from explicit features [Phi_r A^T, Phi_r].
DenseMatrix kernel_space_cov(const Instance& inst) {
  using Ld = long double;
  const DenseMatrix a = fit_A_exact(inst.phi_m, inst.phi_r);
  auto features = [&](const DenseMatrix& phi) {
    Matrix<Ld> f(phi.rows(), a.rows() + phi.cols());
    f << (phi * a.transpose()).cast<Ld>(), phi.cast<Ld>();
    return f;
  };
  const Matrix<Ld> s = ntk_gp_oracle<Ld>(features(inst.phi_r), features(inst.phi_r_test), Ld(inst.noise_var));
  return s.cast<double>();
}

DenseMatrix factored_cov(const Instance& inst, double perturbation) {
  RichTransform t = fit_transform(exact_bundle(inst.phi_r, inst.phi_m));
  if (perturbation != 0.0) {
    DenseMatrix l = t.L.matrix();
    l(0, 0) *= 1.0 + perturbation;
    t.L = LowerTriangularFactor<double>(l, t.L.jitter_used());
  }
  return predictive_cov(fit_posterior(inst.phi_r, t, inst.noise_var), inst.phi_r_test);
}

constexpr int kInstances = 100;

}  // namespace

GateResult check_equivalence(const SuiteOptions& opts) {
  return timed("woodbury_equivalence", true, [&] {
    double worst = 0.0;
    int worst_index = 0;
    for (int i = 0; i < kInstances; ++i) {
      const Instance inst = make_instance(opts.seed, i);
      const DenseMatrix direct = kernel_space_cov(inst);
      const DenseMatrix factored = factored_cov(inst, opts.factor_perturbation);
      const double gap = (direct - factored).norm() / (direct.norm() + 1e-12);
      if (gap > worst) {
        worst = gap;
        worst_index = i;
      }
    }
    GateResult g;
    g.passed = worst <= 1e-6;
    g.measured = {{"max_relative_gap", worst}, {"worst_instance", worst_index}, {"instances", kInstances},
                  {"tolerance", 1e-6}};
    g.summary = "max relative Frobenius gap " + num(worst) + " over " + std::to_string(kInstances) +
                " instances (tol 1e-6)";
    return g;
  });
}

GateResult check_psd_dominance(const SuiteOptions& opts) {
  return timed("psd_dominance", true, [&] {
    double min_eig = std::numeric_limits<double>::infinity();
    double min_diag = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kInstances; ++i) {
      const Instance inst = make_instance(opts.seed, i);
      const RichTransform rich = fit_transform(exact_bundle(inst.phi_r, inst.phi_m));
      const DenseMatrix s_b = predictive_cov(fit_posterior(inst.phi_r, rich, inst.noise_var), inst.phi_r_test);
      const DenseMatrix s_bll = predictive_cov(
          fit_posterior(inst.phi_r, RichTransform::identity(inst.phi_r.cols()), inst.noise_var), inst.phi_r_test);
      const DenseMatrix diff = symmetrized(s_b - s_bll);
      min_eig = std::min(min_eig, sym_eigvals(diff).front());
      min_diag = std::min(min_diag, diff.diagonal().minCoeff());
    }
    GateResult g;
    g.passed = min_eig >= -1e-8 && min_diag >= -1e-8;
    g.measured = {{"min_eigenvalue", min_eig}, {"min_diagonal_gap", min_diag}, {"tolerance", -1e-8}};
    g.summary = "min eigenvalue of S^B - S^BLL " + num(min_eig) + " (floor -1e-8)";
    return g;
  });
}

GateResult check_transform_invariants(const SuiteOptions& opts) {
  return timed("transform_invariants", true, [&] {
    double min_floor = std::numeric_limits<double>::infinity();
    double worst_factor = 0.0;
    bool deterministic = true;
    for (int i = 0; i < kInstances; ++i) {
      const Instance inst = make_instance(opts.seed, i);
      const FeatureBundle b = exact_bundle(inst.phi_r, inst.phi_m);
      const RichTransform t = fit_transform(b);
      min_floor = std::min(min_floor, sym_eigvals(t.gram_btb).front());
      const DenseMatrix a = fit_A_exact(inst.phi_m, inst.phi_r);
      DenseMatrix btb = a.transpose() * a;
      btb.diagonal().array() += 1.0;
      worst_factor = std::max(worst_factor, relative_frobenius(t.L.reconstruct(), btb));
      const SubsampleSpec spec{inst.phi_r.cols(), derive_seed(opts.seed, 7)};
      deterministic = deterministic && fit_transform(b, 0.0, spec).L.matrix() == fit_transform(b, 0.0, spec).L.matrix();
    }
    GateResult g;
    g.passed = min_floor >= 1.0 - 1e-8 && worst_factor <= 1e-8 && deterministic;
    g.measured = {{"min_gram_eigenvalue", min_floor},
                  {"max_factor_error", worst_factor},
                  {"subsample_deterministic", deterministic}};
    g.summary = "min eig(B^T B) " + num(min_floor) + ", max |LL^T - (A^T A + I)| rel " +
                num(worst_factor) + (deterministic ? ", deterministic" : ", NOT deterministic");
    return g;
  });
}

GateResult check_posterior_invariants(const SuiteOptions& opts) {
  return timed("posterior_invariants", true, [&] {
    double worst_asym = 0.0;
    double min_diag = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kInstances; ++i) {
      const Instance inst = make_instance(opts.seed, i);
      const RichTransform t = fit_transform(exact_bundle(inst.phi_r, inst.phi_m));
      for (double s2 : {1e-4, inst.noise_var, 10.0}) {
        const DenseMatrix s = predictive_cov(fit_posterior(inst.phi_r, t, s2), inst.phi_r_test);
        worst_asym = std::max(worst_asym, (s - s.transpose()).cwiseAbs().maxCoeff());
        min_diag = std::min(min_diag, s.diagonal().minCoeff());
      }
    }
    GateResult g;
    g.passed = worst_asym == 0.0 && min_diag >= -1e-10;
    g.measured = {{"max_asymmetry", worst_asym}, {"min_diagonal", min_diag}};
    g.summary = "max asymmetry " + num(worst_asym) + ", min diagonal " + num(min_diag);
    return g;
  });
}

namespace {

// Fixed population for the rate gates: Gaussian inputs through a random tanh MLP.
BackboneModel population_model(std::uint64_t seed, Eigen::Index input_dim, Eigen::Index width) {
  BackboneConfig c;
  c.input_dim = input_dim;
  c.hidden_widths = {width, width};
  c.activation = Activation::Tanh;
  c.seed = seed;
  return init_model(c);
}

}  // namespace

GateResult check_projection_rate(const SuiteOptions& opts) {
  return timed("projection_rate", true, [&] {
    const BackboneModel model = population_model(derive_seed(opts.seed, 40), 3, 8);
    const std::vector<Eigen::Index> sizes{250, 1000, 4000};
    const Eigen::Index n_ref = 64 * sizes.back();
    const Eigen::Index r = model.last_layer_feature_dim();
    const Eigen::Index m = model.hidden_param_count();

    // Reference map from streamed normal equations.
    DenseMatrix normal = DenseMatrix::Zero(r, r);
    DenseMatrix cross = DenseMatrix::Zero(r, m);
    constexpr Eigen::Index kChunk = 4096;
    for (Eigen::Index start = 0; start < n_ref; start += kChunk) {
      const Eigen::Index len = std::min(kChunk, n_ref - start);
      const DenseMatrix x = gaussian(len, 3, derive_seed(opts.seed, 41 + static_cast<std::uint64_t>(start)));
      const DenseMatrix phi_r = extract_last_layer(model, x);
      normal.noalias() += phi_r.transpose() * phi_r;
      cross.noalias() += phi_r.transpose() * hidden_jacobian(model, x);
    }
    const auto chol = cholesky(symmetrized(normal));
    const DenseMatrix a_ref =
        tri_solve(chol, tri_solve(chol, cross, TriSide::Lower), TriSide::LowerTranspose).transpose();

    std::vector<double> meds;
    nlohmann::json per_n = nlohmann::json::array();
    for (std::size_t j = 0; j < sizes.size(); ++j) {
      std::vector<double> errs;
      for (int s = 0; s < 10; ++s) {
        const DenseMatrix x = gaussian(sizes[j], 3, derive_seed(opts.seed, 5000 + 100 * j + static_cast<std::uint64_t>(s)));
        const DenseMatrix a = fit_A_exact(extract_hidden_exact(model, x), extract_last_layer(model, x));
        errs.push_back(spectral_norm(DenseMatrix(a - a_ref)));
      }
      meds.push_back(median(errs));
      per_n.push_back({{"N", sizes[j]}, {"median_error", meds.back()}});
    }
    const double slope =
        loglog_slope(std::vector<double>(sizes.begin(), sizes.end()), meds);
    GateResult g;
    g.passed = slope >= -0.65 && slope <= -0.35;
    g.measured = {{"slope", slope}, {"window", {-0.65, -0.35}}, {"per_N", per_n}, {"N_ref", n_ref}};
    g.summary = "log-log slope " + num(slope) + " (window [-0.65, -0.35])";
    return g;
  });
}

namespace {

struct SubsampleSetup {
  BackboneModel model;
  DenseMatrix phi_r;  // 2N rows
  DenseMatrix phi_test;
  RichTransform transform;
  double noise_var = 1.0;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double k_feature = 0.0;  // max ||phi_L|| over train and test rows
  Eigen::Index n = 0;
};

// L is fitted once on all 2N rows and then held fixed. sigma^2 puts the leading
// direction at N lambda_max / sigma^2 = sqrt(2) for N rows and 2 sqrt(2) for 2N.
SubsampleSetup subsample_setup(std::uint64_t seed) {
  SubsampleSetup s;
  s.n = 20000;
  s.model = population_model(derive_seed(seed, 50), 3, 8);
  const DenseMatrix x = gaussian(2 * s.n, 3, derive_seed(seed, 51));
  const FeatureBundle bundle = extract_features(s.model, x);
  s.phi_r = bundle.phi_r;
  s.phi_test = extract_last_layer(s.model, gaussian(20, 3, derive_seed(seed, 52)));
  s.transform = fit_transform(bundle);
  const DenseMatrix phi_l = s.phi_r * s.transform.L.matrix();
  const auto eig = sym_eigvals(DenseMatrix(phi_l.transpose() * phi_l / static_cast<double>(phi_l.rows())));
  s.lambda_min = eig.front();
  s.lambda_max = eig.back();
  s.noise_var = static_cast<double>(s.n) * s.lambda_max / std::sqrt(2.0);
  const DenseMatrix test_l = s.phi_test * s.transform.L.matrix();
  s.k_feature = std::max(phi_l.rowwise().norm().maxCoeff(), test_l.rowwise().norm().maxCoeff());
  return s;
}

std::vector<double> subsample_errors(const SubsampleSetup& s, Eigen::Index n, Eigen::Index k, int draws,
                                     std::uint64_t seed) {
  const DenseMatrix phi = s.phi_r.topRows(n);
  const DenseMatrix full = predictive_cov(fit_posterior(phi, s.transform, s.noise_var), s.phi_test);
  std::vector<double> errs;
  for (int d = 0; d < draws; ++d) {
    const SubsampleSpec spec{k, derive_seed(seed, 1000 * static_cast<std::uint64_t>(k) + static_cast<std::uint64_t>(d))};
    const DenseMatrix sub = predictive_cov(fit_posterior(phi, s.transform, s.noise_var, spec), s.phi_test);
    errs.push_back(spectral_norm(DenseMatrix(sub - full)));
  }
  return errs;
}

}  // namespace

GateResult check_subsample_rate(const SuiteOptions& opts) {
  return timed("subsample_rate", true, [&] {
    const SubsampleSetup s = subsample_setup(opts.seed);
    const Eigen::Index r = s.transform.dim();
    const std::vector<Eigen::Index> ks{r, 4 * r, 16 * r, 64 * r};

    std::vector<double> meds;
    nlohmann::json per_k = nlohmann::json::array();
    for (Eigen::Index k : ks) {
      meds.push_back(median(subsample_errors(s, s.n, k, 20, derive_seed(opts.seed, 53))));
    }
    bool non_increasing = true;
    for (std::size_t i = 1; i < meds.size(); ++i) non_increasing = non_increasing && meds[i] <= meds[i - 1];
    const double slope = loglog_slope(std::vector<double>(ks.begin(), ks.end()), meds);

    // N-doubling at fixed k: 200 draws per median to keep Monte-Carlo noise well under the tolerance.
    double worst_change = 0.0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double at_n = median(subsample_errors(s, s.n, ks[i], 200, derive_seed(opts.seed, 54)));
      const double at_2n = median(subsample_errors(s, 2 * s.n, ks[i], 200, derive_seed(opts.seed, 55)));
      const double change = std::abs(at_2n / at_n - 1.0);
      worst_change = std::max(worst_change, change);
      per_k.push_back({{"k", ks[i]}, {"median_error_20_seeds", meds[i]}, {"median_error_N", at_n},
                       {"median_error_2N", at_2n}, {"relative_change", change}});
    }

    GateResult g;
    g.passed = slope >= -0.7 && slope <= -0.3 && non_increasing && worst_change < 0.25;
    g.measured = {{"slope", slope},
                  {"window", {-0.7, -0.3}},
                  {"non_increasing", non_increasing},
                  {"max_relative_change_when_N_doubles", worst_change},
                  {"N", s.n},
                  {"noise_var", s.noise_var},
                  {"lambda_max", s.lambda_max},
                  {"per_k", per_k}};
    g.summary = "slope " + num(slope) + (non_increasing ? ", non-increasing" : ", NOT monotone") +
                ", max change on doubling N " + num(worst_change) + " (< 0.25)";
    return g;
  });
}

GateResult check_alternative_bound(const SuiteOptions& opts) {
  return timed("alt_bound_informational", false, [&] {
    const SubsampleSetup s = subsample_setup(opts.seed);
    const Eigen::Index r = s.transform.dim();
    constexpr double kDelta = 0.1;
    const double n_test = static_cast<double>(s.phi_test.rows());
    const double k4 = std::pow(s.k_feature, 4);
    const double log_term = std::log(4.0 * static_cast<double>(r) / kDelta);
    const double sigma = std::sqrt(s.noise_var);
    const double n = static_cast<double>(s.n);

    nlohmann::json rows = nlohmann::json::array();
    int within = 0;
    int total = 0;
    for (Eigen::Index k : {r, 4 * r, 16 * r, 64 * r}) {
      const double emp = median(subsample_errors(s, s.n, k, 20, derive_seed(opts.seed, 53)));
      const double root = std::sqrt(8.0 * log_term / (3.0 * static_cast<double>(k)));
      const double original = n_test * 2.0 * k4 / s.lambda_min * root;
      const double denom = sigma / n + s.lambda_min / (2.0 * sigma);
      const double alternative = n_test * 4.0 * k4 / (denom * denom) / n * root;
      const bool ok = emp <= std::min(original, alternative);
      within += ok;
      ++total;
      rows.push_back({{"k", k}, {"empirical", emp}, {"original_bound", original},
                      {"alternative_bound", alternative}, {"within_min", ok}});
    }
    GateResult g;
    g.passed = within == total;
    g.measured = {{"K", s.k_feature}, {"lambda_min", s.lambda_min}, {"delta", kDelta}, {"per_k", rows}};
    g.summary = std::to_string(within) + "/" + std::to_string(total) + " k values below min(original, alternative)";
    return g;
  });
}

GateResult check_sketch_fidelity(const SuiteOptions& opts) {
  return timed("sketch_fidelity", true, [&] {
    // Reference model: random ReLU MLP, width 32 (r = 33, m = 1216), 400 Gaussian inputs.
    BackboneConfig c;
    c.input_dim = 4;
    c.hidden_widths = {32, 32};
    c.seed = derive_seed(opts.seed, 60);
    const BackboneModel model = init_model(c);
    const DenseMatrix x = gaussian(400, 4, derive_seed(opts.seed, 61));
    const FeatureBundle exact = extract_features(model, x);
    const DenseMatrix gram = sketch_gram(exact);
    const RichTransform t_exact = fit_transform(exact);
    const DenseMatrix btb = t_exact.L.reconstruct();
    const Eigen::Index r = t_exact.dim();

    auto sketched = [&](Eigen::Index q, std::uint64_t seed) {
      FeatureOptions o;
      SketchConfig sk;
      sk.q = q;
      sk.seed = seed;
      o.sketch = sk;
      return extract_features(model, x, o);
    };

    const std::vector<Eigen::Index> qs{64, 128, 256, 512};
    std::vector<double> meds;
    for (Eigen::Index q : qs) {
      std::vector<double> errs;
      for (int s = 0; s < 10; ++s) {
        errs.push_back(relative_frobenius(sketch_gram(sketched(q, derive_seed(opts.seed, 62 + 100 * static_cast<std::uint64_t>(s)))), gram));
      }
      meds.push_back(median(errs));
    }
    const double slope = loglog_slope(std::vector<double>(qs.begin(), qs.end()), meds);

    std::vector<double> l_errs;
    for (int s = 0; s < 10; ++s) {
      const RichTransform t = fit_transform(sketched(8 * r, derive_seed(opts.seed, 63 + 100 * static_cast<std::uint64_t>(s))));
      l_errs.push_back(relative_frobenius(t.L.reconstruct(), btb));
    }
    const double l_err = median(l_errs);
    const DenseMatrix g_hidden = btb - DenseMatrix::Identity(r, r);
    const double eff_rank = g_hidden.trace() * g_hidden.trace() / g_hidden.squaredNorm();

    GateResult g;
    g.passed = slope >= -0.8 && slope <= -0.2 && l_err <= 0.1;
    g.measured = {{"gram_slope", slope},
                  {"gram_window", {-0.8, -0.2}},
                  {"gram_median_errors", meds},
                  {"q_8r", 8 * r},
                  {"btb_median_relative_error", l_err},
                  {"btb_tolerance", 0.1},
                  {"effective_rank_AtA", eff_rank},
                  {"predicted_error_sqrt_(1+reff)/q", std::sqrt((1.0 + eff_rank) / static_cast<double>(8 * r))}};
    g.summary = "Gram slope " + num(slope) + ", B^T B error at q=8r " + num(l_err) +
                " (tol 0.1; effective rank of A^T A " + num(eff_rank) + ")";
    return g;
  });
}

GateResult check_gradients(const SuiteOptions& opts) {
  return timed("gradient_check", true, [&] {
    struct Arch {
      Eigen::Index d;
      std::vector<Eigen::Index> widths;
      Activation act;
    };
    const std::vector<Arch> archs{{3, {8}, Activation::Tanh}, {2, {6, 5}, Activation::ReLU},
                                  {4, {7, 6, 5}, Activation::Tanh}};
    constexpr double kStep = 1e-5;
    double worst = 0.0;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t a = 0; a < archs.size(); ++a) {
      BackboneConfig c;
      c.input_dim = archs[a].d;
      c.hidden_widths = archs[a].widths;
      c.activation = archs[a].act;
      c.seed = derive_seed(opts.seed, 70 + a);
      BackboneModel model = init_model(c);
      for (auto& layer : model.layers()) {
        layer.bias = 0.1 * gaussian(layer.bias.size(), 1, derive_seed(c.seed, layer.bias.size())).col(0);
      }
      const DenseVector theta = model.parameters();
      const DenseMatrix xs = gaussian(5, c.input_dim, derive_seed(opts.seed, 80 + a));
      double arch_worst = 0.0;
      for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        const DenseVector x = xs.row(i).transpose();
        const ParamGradient grad = param_gradient(model, x);
        DenseVector analytic(theta.size());
        // Flat layout: hidden block first, then the last layer.
        analytic << grad.hidden, grad.last;
        BackboneModel probe = model;
        for (Eigen::Index p = 0; p < theta.size(); ++p) {
          DenseVector t = theta;
          t(p) += kStep;
          probe.set_parameters(t);
          const double up = forward(probe, x).output(0);
          t(p) -= 2 * kStep;
          probe.set_parameters(t);
          const double down = forward(probe, x).output(0);
          const double fd = (up - down) / (2 * kStep);
          const double denom = std::max({std::abs(fd), std::abs(analytic(p)), 1e-6});
          arch_worst = std::max(arch_worst, std::abs(fd - analytic(p)) / denom);
        }
      }
      worst = std::max(worst, arch_worst);
      per.push_back({{"input_dim", c.input_dim}, {"widths", c.hidden_widths}, {"activation", to_string(c.activation)},
                     {"max_relative_error", arch_worst}});
    }
    GateResult g;
    g.passed = worst <= 1e-4;
    g.measured = {{"max_relative_error", worst}, {"tolerance", 1e-4}, {"step", kStep}, {"architectures", per}};
    g.summary = "max FD relative error " + num(worst) + " over 3 architectures (tol 1e-4)";
    return g;
  });
}

bool SuiteReport::hard_gates_passed() const {
  return std::all_of(gates.begin(), gates.end(), [](const GateResult& g) { return !g.hard || g.passed; });
}

const GateResult& SuiteReport::gate(const std::string& name) const {
  for (const auto& g : gates)
    if (g.name == name) return g;
  throw std::out_of_range("no gate named " + name);
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : gates) {
    arr.push_back({{"name", g.name}, {"hard", g.hard}, {"passed", g.passed}, {"summary", g.summary},
                   {"seconds", g.seconds}, {"measured", g.measured}});
  }
  return {{"library_version", kVersion}, {"seed", seed}, {"hard_gates_passed", hard_gates_passed()}, {"gates", arr}};
}

SuiteReport run_verify_suite(const SuiteOptions& opts) {
  SuiteReport report;
  report.seed = opts.seed;
  report.gates.push_back(check_equivalence(opts));
  report.gates.push_back(check_psd_dominance(opts));
  report.gates.push_back(check_transform_invariants(opts));
  report.gates.push_back(check_posterior_invariants(opts));
  report.gates.push_back(check_projection_rate(opts));
  report.gates.push_back(check_subsample_rate(opts));
  report.gates.push_back(check_sketch_fidelity(opts));
  report.gates.push_back(check_gradients(opts));
  report.gates.push_back(check_alternative_bound(opts));
  return report;
}

}  // namespace richbll
