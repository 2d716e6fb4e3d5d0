#include "hessfit/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <thread>

#include "hessfit/baselines.hpp"
#include "hessfit/criterion.hpp"
#include "hessfit/group_fitters.hpp"
#include "hessfit/linalg.hpp"
#include "hessfit/precond_adapters.hpp"
#include "hessfit/problems.hpp"
#include "hessfit/sparse_fitters.hpp"

namespace hessfit {

namespace {

// rng stream ids; a scenario's randomness is fully determined by its seed.
constexpr std::uint64_t kStreamPairs = 1;
constexpr std::uint64_t kStreamNoise = 2;
constexpr std::uint64_t kStreamProcess = 3;
constexpr std::uint64_t kStreamTensor = 10;
constexpr std::uint64_t kStreamInit = 11;
constexpr std::uint64_t kStreamOptimizer = 12;

}  // namespace

HessianKind hessian_kind_from_name(const std::string& name) {
  if (name == "hilbert3") return HessianKind::kHilbert3;
  if (name == "tridiag50") return HessianKind::kTridiag50;
  if (name == "hilb64reg") return HessianKind::kHilb64Reg;
  if (name == "timevarying") return HessianKind::kTimeVarying;
  throw InvalidArgumentError("unknown hessian kind: " + name);
}

Matrix make_hessian(HessianKind kind, std::size_t n) {
  switch (kind) {
    case HessianKind::kHilbert3:
      return hilbert_matrix(3);
    case HessianKind::kTridiag50: {
      const std::size_t dim = n ? n : 50;
      Matrix h(dim, dim);
      for (std::size_t i = 0; i < dim; ++i) {
        h(i, i) = 1.0;
        if (i + 1 < dim) {
          h(i, i + 1) = 0.5;
          h(i + 1, i) = 0.5;
        }
      }
      return h;
    }
    case HessianKind::kHilb64Reg: {
      const std::size_t dim = n ? n : 64;
      Matrix h = hilbert_matrix(dim);
      for (std::size_t i = 0; i < dim; ++i) h(i, i) += 1e-6;
      return h;
    }
    case HessianKind::kTimeVarying: {
      const std::size_t dim = n ? n : 50;
      Matrix h(dim, dim);
      for (double& x : h.data()) x = 0.25;
      return h;
    }
  }
  throw InvalidArgumentError("make_hessian: bad kind");
}

TimeVaryingHessian::TimeVaryingHessian(std::size_t n, CounterRng rng)
    : h_(make_hessian(HessianKind::kTimeVarying, n)), rng_(rng) {}

void TimeVaryingHessian::advance() {
  const Vector u = rng_.uniform_vector(h_.rows());
  h_.add_outer(1.0, u, u);
}

double ScenarioConfig::extra_double(const std::string& key, double fallback) const {
  auto it = extra.find(key);
  return it == extra.end() ? fallback : std::stod(it->second);
}

long ScenarioConfig::extra_long(const std::string& key, long fallback) const {
  auto it = extra.find(key);
  return it == extra.end() ? fallback : std::stol(it->second);
}

std::string ScenarioConfig::extra_string(const std::string& key,
                                         const std::string& fallback) const {
  auto it = extra.find(key);
  return it == extra.end() ? fallback : it->second;
}

double Curve::final_metric() const {
  return points.empty() ? std::numeric_limits<double>::quiet_NaN() : points.back().metric;
}

double Curve::min_metric() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : points) m = std::min(m, p.metric);
  return m;
}

long Curve::first_iter_at_or_below(double target) const {
  for (const auto& p : points) {
    if (p.metric <= target) return p.iter;
  }
  return -1;
}

namespace {

struct Defaults {
  const char* scenario;
  const char* method;
  std::size_t n;
  long iters;
  double mu;
  double beta;
  double sigma_eps;
  std::vector<std::pair<const char*, const char*>> extra;
  const char* description;
};

// mu = -2 marks "derive from the spectrum at start".
const std::vector<Defaults>& defaults_table() {
  static const std::vector<Defaults> table = {
      // 3x3 Hilbert fitting race
      {"fig1", "euclid", 3, 20000, 0.05, 0.0, 0.0, {}, "Euclidean SGD on hilbert3"},
      {"fig1", "closed_form", 3, 20000, -1.0, 0.0, 0.0, {{"ema_clip", "0.999999999"}},
       "running closed form on hilbert3 (unclipped averaging window)"},
      {"fig1", "newton", 3, 40, -1.0, 0.0, 0.0, {{"p0_scale", "0.02"}},
       "Newton-Schulz fitting from 0.02*I"},
      {"fig1", "spd", 3, 20000, 0.0005, 0.0, 0.0, {}, "SGD on the SPD manifold"},
      {"fig1", "gl", 3, 20000, 1.0, 0.0, 0.0, {}, "general-linear-group SGD"},
      {"fig1", "tri", 3, 20000, 1.0, 0.0, 0.0, {{"tri_mode", "exact"}}, "triangular-group SGD"},
      // 50x50 tridiagonal, clean pairs
      {"fig2a", "gl", 50, 500000, 1.0, 0.0, 0.0, {}, "GL fitter, clean pairs"},
      {"fig2a", "tri", 50, 500000, 1.0, 0.0, 0.0, {{"tri_mode", "exact"}},
       "triangular fitter, clean pairs"},
      {"fig2a", "closed_form", 50, 500000, -1.0, 0.0, 0.0, {{"ema_clip", "0.999"}},
       "running closed form, clean pairs"},
      {"fig2a", "bfgs", 50, 500000, -1.0, 0.0, 0.0, {}, "BFGS baseline, clean pairs"},
      // noisy pairs
      {"fig2b", "gl", 50, 50000, 0.1, 0.0, 0.01, {}, "GL fitter, noisy pairs"},
      {"fig2b", "tri", 50, 50000, 0.1, 0.0, 0.01, {{"tri_mode", "exact"}},
       "triangular fitter, noisy pairs"},
      {"fig2b", "closed_form", 50, 50000, -1.0, 0.0, 0.01, {{"ema_clip", "0.999"}},
       "running closed form, noisy pairs"},
      {"fig2b", "bfgs", 50, 50000, -1.0, 0.0, 0.01, {}, "BFGS baseline, noisy pairs"},
      // time-varying Hessian stream
      {"fig2c", "gl", 50, 5000, 1.0, 0.0, 0.0, {}, "GL fitter, time-varying target"},
      {"fig2c", "tri", 50, 5000, 1.0, 0.0, 0.0, {{"tri_mode", "exact"}},
       "triangular fitter, time-varying target"},
      {"fig2c", "closed_form", 50, 5000, -1.0, 0.0, 0.0, {{"ema_clip", "0.999"}},
       "running closed form, time-varying target"},
      {"fig2c", "bfgs", 50, 5000, -1.0, 0.0, 0.0, {}, "BFGS baseline, time-varying target"},
      // gradient whitening on hilb(64) + 1e-6 I
      {"fig3", "gl", 64, 100000, 1.0, 1.0, 0.0, {}, "whitening, GL fitter"},
      {"fig3", "qeq", 64, 100000, 0.1, 1.0, 0.0, {}, "whitening, dQ = Q E Q"},
      {"fig3", "quad1", 64, 100000, 0.1, 1.0, 0.0, {}, "whitening, dQ = Q^0.5 E Q^1.5"},
      {"fig3", "quad2", 64, 100000, 0.1, 1.0, 0.0, {}, "whitening, quadratic-form update"},
      {"fig3", "qep", 64, 100000, 1.0, 1.0, 0.0, {}, "whitening, dQ = Q E P"},
      // tensor rank decomposition optimizer race
      {"fig4", "gd", 0, 10000, 2e-4, 0.0, 0.0, {}, "plain gradient descent"},
      {"fig4", "lra", 0, 10000, 0.06, 0.0, 0.0,
       {{"rank", "10"}, {"precond_lr", "0.5"}}, "PSGD with the low-rank preconditioner"},
      {"fig4", "quad1", 0, 10000, 0.06, 0.0, 0.0, {{"precond_lr", "0.2"}},
       "PSGD with the dense inverse-free preconditioner"},
      {"fig4", "kron", 0, 10000, 0.06, 0.0, 0.0,
       {{"m1", "17"}, {"m2", "100"}, {"precond_lr", "0.5"}},
       "PSGD with the Kronecker-factored preconditioner"},
      // free-form
      {"custom", "euclid", 0, 10000, 0.05, 0.0, 0.0, {{"hessian", "hilbert3"}},
       "Euclidean SGD on a chosen curvature model"},
      {"custom", "closed_form", 0, 10000, -1.0, 0.0, 0.0, {{"hessian", "hilbert3"}},
       "running closed form on a chosen curvature model"},
      {"custom", "newton", 0, 40, -1.0, 0.0, 0.0, {{"hessian", "hilbert3"}, {"p0_scale", "0.02"}},
       "Newton-Schulz fitting on a chosen curvature model"},
      {"custom", "spd", 0, 10000, -2.0, 0.0, 0.0, {{"hessian", "hilbert3"}},
       "SPD-manifold SGD on a chosen curvature model"},
      {"custom", "bfgs", 0, 10000, -1.0, 0.0, 0.0, {{"hessian", "tridiag50"}}, "BFGS baseline"},
      {"custom", "gl", 0, 10000, 1.0, 0.0, 0.0, {{"hessian", "tridiag50"}}, "GL fitter"},
      {"custom", "tri", 0, 10000, 1.0, 0.0, 0.0, {{"hessian", "tridiag50"}, {"tri_mode", "exact"}},
       "triangular fitter"},
      {"custom", "qeq", 0, 10000, 0.1, 0.0, 0.0, {{"hessian", "tridiag50"}}, "dQ = Q E Q fitter"},
      {"custom", "quad1", 0, 10000, 0.1, 0.0, 0.0, {{"hessian", "tridiag50"}},
       "dQ = Q^0.5 E Q^1.5 fitter"},
      {"custom", "quad2", 0, 10000, 0.1, 0.0, 0.0, {{"hessian", "tridiag50"}},
       "quadratic-form fitter"},
      {"custom", "qep", 0, 10000, 1.0, 0.0, 0.0, {{"hessian", "tridiag50"}}, "dQ = Q E P fitter"},
      {"custom", "diag", 0, 10000, 1.0, 0.0, 0.0, {{"hessian", "tridiag50"}},
       "diagonal-group fitter"},
      {"custom", "kron", 0, 10000, 1.0, 0.0, 0.0,
       {{"hessian", "tridiag50"}, {"m1", "5"}, {"m2", "10"}}, "Kronecker-factored fitter"},
      {"custom", "lra", 0, 10000, 1.0, 0.0, 0.0, {{"hessian", "tridiag50"}, {"rank", "10"}},
       "low-rank fitter"},
  };
  return table;
}

const Defaults* find_defaults(const std::string& scenario, const std::string& method) {
  for (const auto& d : defaults_table()) {
    if (scenario == d.scenario && method == d.method) return &d;
  }
  return nullptr;
}

ScenarioConfig resolve(const ScenarioConfig& cfg) {
  const Defaults* d = find_defaults(cfg.scenario, cfg.method);
  if (d == nullptr) {
    throw InvalidArgumentError("unknown scenario/method pair: " + cfg.scenario + "/" + cfg.method);
  }
  ScenarioConfig out = cfg;
  if (out.n == 0) out.n = d->n;
  if (out.iters <= 0) out.iters = d->iters;
  if (out.mu < 0.0) out.mu = d->mu;  // may stay negative: derived at start
  if (out.beta < 0.0) out.beta = d->beta;
  if (out.sigma_eps < 0.0) out.sigma_eps = d->sigma_eps;
  for (const auto& kv : d->extra) {
    out.extra.emplace(kv.first, kv.second);  // user-set keys win
  }
  return out;
}

// Uniform wrapper over the fitter families for the fitting/whitening loops.
class FitterHandle {
 public:
  virtual ~FitterHandle() = default;
  virtual void observe(const HvpPair& pair) = 0;
  virtual Matrix preconditioner() const = 0;
};

class EuclidHandle final : public FitterHandle {
 public:
  EuclidHandle(std::size_t n, double mu) : p_(Matrix::identity(n)), mu_(mu) {}
  void observe(const HvpPair& pair) override { p_ = euclid_sgd_step(p_, pair, mu_); }
  Matrix preconditioner() const override { return p_; }

 private:
  Matrix p_;
  double mu_;
};

class ClosedFormHandle final : public FitterHandle {
 public:
  ClosedFormHandle(std::size_t n, double ema_clip)
      : state_(Matrix::identity(n), ema_clip) {}
  void observe(const HvpPair& pair) override { state_.update(pair.h); }
  Matrix preconditioner() const override { return state_.preconditioner(); }

 private:
  RunningClosedForm state_;
};

class SpdHandle final : public FitterHandle {
 public:
  SpdHandle(std::size_t n, double mu) : p_(Matrix::identity(n)), mu_(mu) {}
  void observe(const HvpPair& pair) override { p_ = spd_manifold_step(p_, pair, mu_); }
  Matrix preconditioner() const override { return p_; }

 private:
  Matrix p_;
  double mu_;
};

class BfgsHandle final : public FitterHandle {
 public:
  explicit BfgsHandle(std::size_t n) : p_(Matrix::identity(n)) {}
  void observe(const HvpPair& pair) override { p_ = bfgs_step(p_, pair); }
  Matrix preconditioner() const override { return p_; }

 private:
  Matrix p_;
};

class GlHandle final : public FitterHandle {
 public:
  GlHandle(std::size_t n, double mu, double beta) : state_(Matrix::identity(n), beta), mu_(mu) {}
  void observe(const HvpPair& pair) override { state_.step(pair, mu_); }
  Matrix preconditioner() const override { return state_.dense_preconditioner(); }

 private:
  DenseQState state_;
  double mu_;
};

class TriHandle final : public FitterHandle {
 public:
  TriHandle(std::size_t n, double mu, double beta, TriangularMode mode)
      : state_(Matrix::identity(n), beta, mode), mu_(mu) {}
  void observe(const HvpPair& pair) override { state_.step(pair, mu_); }
  Matrix preconditioner() const override { return state_.dense_preconditioner(); }

 private:
  TriangularQState state_;
  double mu_;
};

class QeqHandle final : public FitterHandle {
 public:
  QeqHandle(std::size_t n, double mu, double beta)
      : q_(Matrix::identity(n)), tracker_(beta), mu_(mu) {}
  void observe(const HvpPair& pair) override { q_ = qeq_step(std::move(q_), tracker_, pair, mu_); }
  Matrix preconditioner() const override { return transpose(q_) * q_; }

 private:
  Matrix q_;
  LipschitzTracker tracker_;
  double mu_;
};

class Quad1Handle final : public FitterHandle {
 public:
  Quad1Handle(std::size_t n, double mu, double beta, long rotate_every, int order)
      : state_(Matrix::identity(n), beta, rotate_every, order), mu_(mu) {}
  void observe(const HvpPair& pair) override { state_.step(pair, mu_); }
  Matrix preconditioner() const override { return state_.dense_preconditioner(); }

 private:
  Quad1State state_;
  double mu_;
};

class Quad2Handle final : public FitterHandle {
 public:
  Quad2Handle(std::size_t n, double mu, double beta)
      : q_(Matrix::identity(n)), tracker_(beta), mu_(mu) {}
  void observe(const HvpPair& pair) override {
    q_ = quad2_step(std::move(q_), tracker_, pair, mu_);
  }
  Matrix preconditioner() const override { return transpose(q_) * q_; }

 private:
  Matrix q_;
  LipschitzTracker tracker_;
  double mu_;
};

class QepHandle final : public FitterHandle {
 public:
  QepHandle(std::size_t n, double mu, double beta)
      : q_(Matrix::identity(n)), tracker_(beta), mu_(mu) {}
  void observe(const HvpPair& pair) override { q_ = qep_step(std::move(q_), tracker_, pair, mu_); }
  Matrix preconditioner() const override { return transpose(q_) * q_; }

 private:
  Matrix q_;
  LipschitzTracker tracker_;
  double mu_;
};

class DiagHandle final : public FitterHandle {
 public:
  DiagHandle(std::size_t n, double mu, double beta) : state_(Vector(n, 1.0), beta), mu_(mu) {}
  void observe(const HvpPair& pair) override {
    state_ = diag_step(std::move(state_), pair, mu_);
  }
  Matrix preconditioner() const override { return state_.dense_preconditioner(); }

 private:
  DiagonalQ state_;
  double mu_;
};

class KronHandle final : public FitterHandle {
 public:
  KronHandle(std::size_t m1, std::size_t m2, double mu, double beta, KronMode mode)
      : state_(Matrix::identity(m1), Matrix::identity(m2), beta, mode), mu_(mu) {}
  void observe(const HvpPair& pair) override {
    state_ = kron_step(std::move(state_), pair, mu_);
  }
  Matrix preconditioner() const override { return state_.dense_preconditioner(); }

 private:
  KronQ state_;
  double mu_;
};

class LraHandle final : public FitterHandle {
 public:
  LraHandle(std::size_t n, std::size_t r, double mu, double beta, long balance_every,
            CounterRng& rng)
      : state_(LraQ::random_init(n, r, 1.0, rng, beta)), mu_(mu),
        balance_every_(balance_every) {}
  void observe(const HvpPair& pair) override {
    state_ = lra_step(std::move(state_), pair, mu_);
    if (balance_every_ > 0 && ++steps_ % balance_every_ == 0 && state_.rank() > 0) {
      state_ = lra_balance(std::move(state_), 0.25);
    }
  }
  Matrix preconditioner() const override { return state_.dense_preconditioner(); }

 private:
  LraQ state_;
  double mu_;
  long balance_every_;
  long steps_ = 0;
};

std::unique_ptr<FitterHandle> make_fitter(const ScenarioConfig& cfg, const Matrix& h,
                                          CounterRng& init_rng) {
  const std::size_t n = cfg.n;
  const std::string& m = cfg.method;
  if (m == "euclid") return std::make_unique<EuclidHandle>(n, cfg.mu);
  if (m == "closed_form") {
    return std::make_unique<ClosedFormHandle>(n, cfg.extra_double("ema_clip", 0.999));
  }
  if (m == "spd") {
    double mu = cfg.mu;
    if (mu <= 0.0) {
      // 80% of the stability bound 0.5 / lambda_max(H + H^2) at P0 = I.
      const EigDecomposition eig = sym_eig(h);
      double lam_max = 0.0;
      for (double lam : eig.eigenvalues) lam_max = std::max(lam_max, lam + lam * lam);
      mu = 0.4 / lam_max;
    }
    return std::make_unique<SpdHandle>(n, mu);
  }
  if (m == "bfgs") return std::make_unique<BfgsHandle>(n);
  if (m == "gl") return std::make_unique<GlHandle>(n, cfg.mu, cfg.beta);
  if (m == "tri") {
    const std::string mode_name = cfg.extra_string("tri_mode", "exact");
    TriangularMode mode = TriangularMode::kExactQr;
    if (mode_name == "approx") mode = TriangularMode::kApprox;
    else if (mode_name == "triu") mode = TriangularMode::kTriuOnly;
    else if (mode_name != "exact") throw InvalidArgumentError("tri_mode: " + mode_name);
    return std::make_unique<TriHandle>(n, cfg.mu, cfg.beta, mode);
  }
  if (m == "qeq") return std::make_unique<QeqHandle>(n, cfg.mu, cfg.beta);
  if (m == "quad1") {
    return std::make_unique<Quad1Handle>(n, cfg.mu, cfg.beta, cfg.extra_long("rotate_every", 32),
                                         static_cast<int>(cfg.extra_long("rotation_order", 3)));
  }
  if (m == "quad2") return std::make_unique<Quad2Handle>(n, cfg.mu, cfg.beta);
  if (m == "qep") return std::make_unique<QepHandle>(n, cfg.mu, cfg.beta);
  if (m == "diag") return std::make_unique<DiagHandle>(n, cfg.mu, cfg.beta);
  if (m == "kron") {
    const auto m1 = static_cast<std::size_t>(cfg.extra_long("m1", 0));
    const auto m2 = static_cast<std::size_t>(cfg.extra_long("m2", 0));
    if (m1 * m2 != n) throw InvalidArgumentError("kron: m1*m2 must equal n");
    const KronMode mode = cfg.extra_string("kron_mode", "qr") == "inverse_free"
                              ? KronMode::kInverseFree
                              : KronMode::kQr;
    return std::make_unique<KronHandle>(m1, m2, cfg.mu, cfg.beta, mode);
  }
  if (m == "lra") {
    return std::make_unique<LraHandle>(n, static_cast<std::size_t>(cfg.extra_long("rank", 10)),
                                       cfg.mu, cfg.beta, cfg.extra_long("balance_every", 100),
                                       init_rng);
  }
  throw InvalidArgumentError("unknown fitter method: " + m);
}

bool is_log_point(const std::string& scenario, long t, long iters) {
  if (scenario == "fig3") return t % 100 == 0 || t == iters;
  if (t == 0 || t < 1000 || t % 10 == 0) return true;
  return t == iters;
}

long long elapsed_ns(const std::chrono::steady_clock::time_point& start, bool timing) {
  if (!timing) return 0;
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                              start)
      .count();
}

Curve run_newton(const ScenarioConfig& cfg, const Matrix& h) {
  Curve curve{cfg.scenario, cfg.method, cfg.seed, {}, false, 0};
  const auto start = std::chrono::steady_clock::now();
  const Matrix hsq = h * h;
  const Matrix h_true = h;  // clean pairs
  Matrix p = Matrix::identity(cfg.n) * cfg.extra_double("p0_scale", 0.02);
  const double start_norm = frobenius_norm(p);
  curve.points.push_back({0, fitting_error(p, h_true), elapsed_ns(start, cfg.timing), false});
  for (long t = 1; t <= cfg.iters; ++t) {
    p = newton_schulz_step(p, hsq);
    if (!p.all_finite() || frobenius_norm(p) > 1e6 * start_norm) {
      curve.diverged = true;
      curve.points.push_back({t, std::numeric_limits<double>::quiet_NaN(),
                              elapsed_ns(start, cfg.timing), true});
      break;
    }
    curve.points.push_back({t, fitting_error(p, h_true), elapsed_ns(start, cfg.timing), false});
  }
  return curve;
}

Curve run_fitting(const ScenarioConfig& cfg_in) {
  ScenarioConfig cfg = cfg_in;
  const HessianKind kind =
      cfg.scenario == "fig1"    ? HessianKind::kHilbert3
      : cfg.scenario == "fig2c" ? HessianKind::kTimeVarying
      : cfg.scenario == "custom"
          ? hessian_kind_from_name(cfg.extra_string("hessian", "tridiag50"))
          : HessianKind::kTridiag50;
  const bool time_varying = kind == HessianKind::kTimeVarying;
  Matrix h = make_hessian(kind, cfg.n);
  if (cfg.n == 0) cfg.n = h.rows();
  if (cfg.n != h.rows()) {
    throw InvalidArgumentError("scenario dimension does not match the curvature model");
  }

  if (cfg.method == "newton") {
    if (time_varying) throw InvalidArgumentError("newton: fixed curvature required");
    return run_newton(cfg, h);
  }

  // Ground truth (H^2 + sigma^2 I)^{1/2}; equal to H itself for clean pairs
  // on these positive semidefinite models.
  Matrix h_true;
  if (!time_varying) {
    if (cfg.sigma_eps > 0.0) {
      Matrix hsq = h * h;
      for (std::size_t i = 0; i < hsq.rows(); ++i) hsq(i, i) += cfg.sigma_eps * cfg.sigma_eps;
      h_true = spd_power(symmetrize(hsq), 0.5);
    } else {
      h_true = h;
    }
  }

  CounterRng pair_rng(cfg.seed, kStreamPairs);
  CounterRng noise_rng(cfg.seed, kStreamNoise);
  CounterRng init_rng(cfg.seed, kStreamInit);
  TimeVaryingHessian process(cfg.n, CounterRng(cfg.seed, kStreamProcess));

  Curve curve{cfg.scenario, cfg.method, cfg.seed, {}, false, 0};
  const auto start = std::chrono::steady_clock::now();
  auto fitter = make_fitter(cfg, h, init_rng);

  double min_err = std::numeric_limits<double>::infinity();
  const auto log_point = [&](long t) {
    const Matrix& target = time_varying ? process.current() : h_true;
    const double err = fitting_error(fitter->preconditioner(), target);
    min_err = std::min(min_err, err);
    // Growth well past the best error seen marks divergence; jitter around
    // the machine-precision floor does not count.
    const bool flagged =
        !std::isfinite(err) || (err > 10.0 * min_err && err > 1e-12 * (1.0 + min_err));
    curve.points.push_back({t, err, elapsed_ns(start, cfg.timing), flagged});
    if (flagged) curve.diverged = true;
  };

  log_point(0);
  for (long t = 1; t <= cfg.iters; ++t) {
    const Matrix& cur = time_varying ? process.current() : h;
    HvpPair pair;
    pair.v = pair_rng.normal_vector(cfg.n);
    pair.h = matvec(cur, pair.v);
    if (cfg.sigma_eps > 0.0) {
      const Vector eps = noise_rng.normal_vector(cfg.n);
      for (std::size_t i = 0; i < pair.h.size(); ++i) pair.h[i] += cfg.sigma_eps * eps[i];
    }
    try {
      fitter->observe(pair);
    } catch (const CurvatureError&) {
      ++curve.skipped_updates;
    } catch (const Error&) {
      curve.diverged = true;
      curve.points.push_back({t, std::numeric_limits<double>::quiet_NaN(),
                              elapsed_ns(start, cfg.timing), true});
      break;
    }
    if (is_log_point(cfg.scenario, t, cfg.iters)) log_point(t);
    if (time_varying) process.advance();
  }
  return curve;
}

Curve run_whitening(const ScenarioConfig& cfg) {
  Matrix h = make_hessian(HessianKind::kHilb64Reg, cfg.n);
  const Matrix chol = cholesky_lower(h);

  CounterRng dummy_rng(cfg.seed, kStreamPairs);
  CounterRng grad_rng(cfg.seed, kStreamNoise);
  CounterRng init_rng(cfg.seed, kStreamInit);

  Curve curve{cfg.scenario, cfg.method, cfg.seed, {}, false, 0};
  const auto start = std::chrono::steady_clock::now();
  auto fitter = make_fitter(cfg, h, init_rng);

  const auto log_point = [&](long t) {
    const Matrix p = fitter->preconditioner();
    const Matrix php = symmetrize((p * h) * p);
    const EigDecomposition eig = sym_eig(php);
    const double lo = eig.eigenvalues.front();
    const double hi = eig.eigenvalues.back();
    const double kappa = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    curve.points.push_back({t, kappa, elapsed_ns(start, cfg.timing), !std::isfinite(kappa)});
    if (!std::isfinite(kappa)) curve.diverged = true;
  };

  log_point(0);
  for (long t = 1; t <= cfg.iters; ++t) {
    HvpPair pair;
    pair.v = dummy_rng.normal_vector(cfg.n);
    // Gradient sample with covariance H.
    pair.h = matvec(chol, grad_rng.normal_vector(cfg.n));
    try {
      fitter->observe(pair);
    } catch (const Error&) {
      curve.diverged = true;
      curve.points.push_back({t, std::numeric_limits<double>::quiet_NaN(),
                              elapsed_ns(start, cfg.timing), true});
      break;
    }
    if (is_log_point(cfg.scenario, t, cfg.iters)) log_point(t);
  }
  return curve;
}

Curve run_trd(const ScenarioConfig& cfg) {
  const auto rank = static_cast<std::size_t>(cfg.extra_long("R", 10));
  const auto ni = static_cast<std::size_t>(cfg.extra_long("I", 20));
  const auto nj = static_cast<std::size_t>(cfg.extra_long("J", 50));
  const auto nk = static_cast<std::size_t>(cfg.extra_long("K", 100));
  const std::size_t dim = rank * (ni + nj + nk);

  CounterRng tensor_rng(cfg.seed, kStreamTensor);
  const Tensor3 tau = planted_trd_tensor(ni, nj, nk, rank, tensor_rng);
  const Problem problem = trd_problem(tau, rank);

  // Near-saddle start: tiny x and y, generic z.
  CounterRng init_rng(cfg.seed, kStreamInit);
  Vector theta(dim);
  const std::size_t xy = rank * (ni + nj);
  for (std::size_t i = 0; i < dim; ++i) {
    theta[i] = (i < xy ? 1e-3 : 1.0) * init_rng.normal();
  }

  Curve curve{cfg.scenario, cfg.method, cfg.seed, {}, false, 0};
  const auto start = std::chrono::steady_clock::now();

  if (cfg.method == "gd") {
    auto lg = problem.loss_grad(theta);
    curve.points.push_back({0, lg.first, elapsed_ns(start, cfg.timing), false});
    for (long t = 1; t <= cfg.iters; ++t) {
      for (std::size_t i = 0; i < dim; ++i) theta[i] -= cfg.mu * lg.second[i];
      lg = problem.loss_grad(theta);
      if (!std::isfinite(lg.first)) {
        curve.diverged = true;
        curve.points.push_back({t, std::numeric_limits<double>::quiet_NaN(),
                                elapsed_ns(start, cfg.timing), true});
        break;
      }
      if (is_log_point(cfg.scenario, t, cfg.iters)) {
        curve.points.push_back({t, lg.first, elapsed_ns(start, cfg.timing), false});
      }
    }
    return curve;
  }

  // PSGD variants. The factor scale comes from the first curvature sample.
  OptimizerConfig ocfg;
  ocfg.mode = PsgdMode::kHvp;
  ocfg.theta_lr = cfg.mu;
  ocfg.precond_lr = cfg.extra_double("precond_lr", 1.0);
  ocfg.update_prob = cfg.extra_double("update_prob", 1.0);

  CounterRng opt_rng(cfg.seed, kStreamOptimizer);
  const Vector probe = opt_rng.normal_vector(dim);
  const Vector h1 = fd_hvp(problem, theta, probe, 1e-5 * (1.0 + norm_inf(theta)));
  const double scale = init_scale(h1).scale;

  std::unique_ptr<Preconditioner> precond;
  if (cfg.method == "lra") {
    const auto r = static_cast<std::size_t>(cfg.extra_long("rank", 10));
    precond = std::make_unique<LraPrecond>(LraQ::random_init(dim, r, scale, opt_rng),
                                           cfg.extra_long("balance_every", 100));
  } else if (cfg.method == "quad1") {
    precond = std::make_unique<Quad1Precond>(
        Quad1State(Matrix::identity(dim) * scale, 0.0, cfg.extra_long("rotate_every", 32),
                   static_cast<int>(cfg.extra_long("rotation_order", 3))));
  } else if (cfg.method == "kron") {
    const auto m1 = static_cast<std::size_t>(cfg.extra_long("m1", 0));
    const auto m2 = static_cast<std::size_t>(cfg.extra_long("m2", 0));
    if (m1 * m2 != dim) throw InvalidArgumentError("kron: m1*m2 must equal the parameter count");
    const double fs = std::sqrt(scale);
    precond = std::make_unique<KronPrecond>(
        KronQ(Matrix::identity(m1) * fs, Matrix::identity(m2) * fs));
  } else {
    throw InvalidArgumentError("fig4 method must be gd, lra, quad1 or kron");
  }

  PsgdState state;
  state.theta = std::move(theta);
  curve.points.push_back({0, problem.loss(state.theta), elapsed_ns(start, cfg.timing), false});
  for (long t = 1; t <= cfg.iters; ++t) {
    StepStats stats;
    try {
      stats = psgd_step(problem, state, *precond, ocfg, opt_rng);
    } catch (const Error&) {
      curve.diverged = true;
      curve.points.push_back({t, std::numeric_limits<double>::quiet_NaN(),
                              elapsed_ns(start, cfg.timing), true});
      break;
    }
    if (is_log_point(cfg.scenario, t, cfg.iters)) {
      curve.points.push_back({t, stats.loss, elapsed_ns(start, cfg.timing), false});
    }
  }
  return curve;
}

}  // namespace

const std::vector<RegistryEntry>& scenario_registry() {
  static const std::vector<RegistryEntry> entries = [] {
    std::vector<RegistryEntry> out;
    for (const auto& d : defaults_table()) {
      out.push_back({d.scenario, d.method, d.description});
    }
    return out;
  }();
  return entries;
}

ScenarioConfig registered_config(const std::string& scenario, const std::string& method) {
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  cfg.method = method;
  return resolve(cfg);
}

Curve run_scenario(const ScenarioConfig& cfg) {
  const ScenarioConfig rc = resolve(cfg);
  if (rc.scenario == "fig3") return run_whitening(rc);
  if (rc.scenario == "fig4") return run_trd(rc);
  return run_fitting(rc);
}

std::vector<Curve> run_scenarios(const std::vector<ScenarioConfig>& configs, std::size_t workers) {
  std::vector<Curve> results(configs.size());
  if (configs.empty()) return results;
  workers = std::max<std::size_t>(1, std::min(workers, configs.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(configs.size());
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= configs.size()) return;
        try {
          results[i] = run_scenario(configs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::string curve_to_csv(const Curve& curve) {
  std::string out = "scenario,method,seed,iter,metric,wall_ns\n";
  char buf[160];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%llu,%ld,%.17g,%lld\n", curve.scenario.c_str(),
                  curve.method.c_str(), static_cast<unsigned long long>(curve.seed), p.iter,
                  p.metric, p.wall_ns);
    out += buf;
  }
  return out;
}

void write_csv_file(const Curve& curve, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  const std::string csv = curve_to_csv(curve);
  f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
  if (!f) throw Error("write failed: " + path);
}

double fit_loglog_slope(const std::vector<CurvePoint>& points, long lo_iter, long hi_iter) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  long count = 0;
  for (const auto& p : points) {
    if (p.iter < std::max(lo_iter, 1L) || p.iter > hi_iter) continue;
    if (!(p.metric > 0.0)) {
      throw InvalidArgumentError("fit_loglog_slope: nonpositive metric at iter " +
                                 std::to_string(p.iter));
    }
    const double x = std::log(static_cast<double>(p.iter));
    const double y = std::log(p.metric);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 10) throw InvalidArgumentError("fit_loglog_slope: need at least 10 points in range");
  const double denom = count * sxx - sx * sx;
  return (count * sxy - sx * sy) / denom;
}

std::vector<CurvePoint> average_curves(const std::vector<Curve>& curves) {
  if (curves.empty()) throw InvalidArgumentError("average_curves: no curves");
  const std::size_t npts = curves.front().points.size();
  for (const auto& c : curves) {
    if (c.points.size() != npts) {
      throw InvalidArgumentError("average_curves: curves have different cadences");
    }
  }
  std::vector<CurvePoint> out(npts);
  for (std::size_t i = 0; i < npts; ++i) {
    out[i].iter = curves.front().points[i].iter;
    double acc = 0.0;
    bool flagged = false;
    for (const auto& c : curves) {
      acc += c.points[i].metric;
      flagged = flagged || c.points[i].diverged;
    }
    out[i].metric = acc / static_cast<double>(curves.size());
    out[i].diverged = flagged;
  }
  return out;
}

double fitting_error(const Matrix& p, const Matrix& h_true) {
  Matrix t = p * h_true;
  for (std::size_t i = 0; i < t.rows(); ++i) t(i, i) -= 1.0;
  return frobenius_norm(t) / std::sqrt(static_cast<double>(t.rows()));
}

}  // namespace hessfit
