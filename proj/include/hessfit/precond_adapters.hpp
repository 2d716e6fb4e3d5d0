#pragma once

#include <utility>

#include "hessfit/group_fitters.hpp"
#include "hessfit/optimizer.hpp"
#include "hessfit/sparse_fitters.hpp"

namespace hessfit {

// Thin owning adapters so each factor family plugs into the optimizer loop.

class DensePrecond final : public Preconditioner {
 public:
  explicit DensePrecond(DenseQState state) : state_(std::move(state)) {}
  void update(const HvpPair& pair, double mu) override { state_.step(pair, mu); }
  Vector apply(const Vector& g) const override { return precond_grad(state_, g); }
  Matrix dense() const override { return state_.dense_preconditioner(); }
  std::size_t dim() const override { return state_.dim(); }
  DenseQState& state() { return state_; }

 private:
  DenseQState state_;
};

class TriangularPrecond final : public Preconditioner {
 public:
  explicit TriangularPrecond(TriangularQState state) : state_(std::move(state)) {}
  void update(const HvpPair& pair, double mu) override { state_.step(pair, mu); }
  Vector apply(const Vector& g) const override { return precond_grad(state_, g); }
  Matrix dense() const override { return state_.dense_preconditioner(); }
  std::size_t dim() const override { return state_.dim(); }
  TriangularQState& state() { return state_; }

 private:
  TriangularQState state_;
};

class Quad1Precond final : public Preconditioner {
 public:
  explicit Quad1Precond(Quad1State state) : state_(std::move(state)) {}
  void update(const HvpPair& pair, double mu) override { state_.step(pair, mu); }
  Vector apply(const Vector& g) const override {
    return matvec_t(state_.q(), matvec(state_.q(), g));
  }
  Matrix dense() const override { return state_.dense_preconditioner(); }
  std::size_t dim() const override { return state_.q().rows(); }
  Quad1State& state() { return state_; }

 private:
  Quad1State state_;
};

class DiagPrecond final : public Preconditioner {
 public:
  explicit DiagPrecond(DiagonalQ state) : state_(std::move(state)) {}
  void update(const HvpPair& pair, double mu) override {
    state_ = diag_step(std::move(state_), pair, mu);
  }
  Vector apply(const Vector& g) const override { return precond_grad(state_, g); }
  Matrix dense() const override { return state_.dense_preconditioner(); }
  std::size_t dim() const override { return state_.dim(); }
  DiagonalQ& state() { return state_; }

 private:
  DiagonalQ state_;
};

class KronPrecond final : public Preconditioner {
 public:
  explicit KronPrecond(KronQ state) : state_(std::move(state)) {}
  void update(const HvpPair& pair, double mu) override {
    state_ = kron_step(std::move(state_), pair, mu);
  }
  Vector apply(const Vector& g) const override { return precond_grad(state_, g); }
  Matrix dense() const override { return state_.dense_preconditioner(); }
  std::size_t dim() const override { return state_.dim(); }
  KronQ& state() { return state_; }

 private:
  KronQ state_;
};

class LraPrecond final : public Preconditioner {
 public:
  explicit LraPrecond(LraQ state, long balance_every = 100, double balance_mu = 0.25)
      : state_(std::move(state)), balance_every_(balance_every), balance_mu_(balance_mu) {}
  void update(const HvpPair& pair, double mu) override {
    state_ = lra_step(std::move(state_), pair, mu);
    if (balance_every_ > 0 && ++steps_ % balance_every_ == 0 && state_.rank() > 0) {
      state_ = lra_balance(std::move(state_), balance_mu_);
    }
  }
  Vector apply(const Vector& g) const override { return precond_grad(state_, g); }
  Matrix dense() const override { return state_.dense_preconditioner(); }
  std::size_t dim() const override { return state_.dim(); }
  LraQ& state() { return state_; }

 private:
  LraQ state_;
  long balance_every_;
  double balance_mu_;
  long steps_ = 0;
};

}  // namespace hessfit
