#pragma once

#include <complex>
#include <limits>
#include <string>
#include <utility>

#include "dplds/core.hpp"
#include "dplds/errors.hpp"

namespace dplds {

/// Discrete-time linear system
///   x(t+1) = A x(t) + B u(t)
///   y(t)   = C x(t) + D u(t)
/// with n states, m inputs and q outputs. Immutable after construction.
template <typename Scalar>
class StateSpaceModel {
 public:
  using Matrix = MatrixX<Scalar>;

  StateSpaceModel(Matrix A, Matrix B, Matrix C, Matrix D)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
    const Index n = A_.rows();
    if (A_.cols() != n)
      throw DimensionError("StateSpaceModel: A must be square, got " +
                           std::to_string(A_.rows()) + "x" + std::to_string(A_.cols()));
    if (B_.rows() != n)
      throw DimensionError("StateSpaceModel: B must have as many rows as A");
    if (C_.cols() != n)
      throw DimensionError("StateSpaceModel: C must have as many columns as A");
    if (D_.rows() != C_.rows() || D_.cols() != B_.cols())
      throw DimensionError("StateSpaceModel: D must be output_dim x input_dim");
    if (input_dim() < 1) throw DimensionError("StateSpaceModel: input dimension must be >= 1");
    if (output_dim() < 1) throw DimensionError("StateSpaceModel: output dimension must be >= 1");
    for (const auto* mat : {&A_, &B_, &C_, &D_})
      if (!mat->allFinite())
        throw DomainError("StateSpaceModel: matrices must have finite entries");
  }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& D() const { return D_; }

  Index state_dim() const { return A_.rows(); }
  Index input_dim() const { return B_.cols(); }
  Index output_dim() const { return C_.rows(); }

 private:
  Matrix A_, B_, C_, D_;
};

/// A finite signal v(0), ..., v(T) of fixed dimension, stored one column per
/// time step. The stacked form [v(0); ...; v(T)] is time-ascending, which for
/// column-major storage is simply the flattened sample matrix.
template <typename Scalar>
class Trajectory {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  explicit Trajectory(Matrix samples) : samples_(std::move(samples)) {
    if (samples_.rows() < 1 || samples_.cols() < 1)
      throw DimensionError("Trajectory: needs at least one sample of dimension >= 1");
  }

  static Trajectory Zero(Index dim, Index horizon) {
    return Trajectory(Matrix::Zero(dim, horizon + 1));
  }

  static Trajectory FromStacked(const Vector& stacked, Index dim) {
    if (dim < 1 || stacked.size() % dim != 0)
      throw DimensionError("Trajectory: stacked length must be a multiple of the dimension");
    return Trajectory(Eigen::Map<const Matrix>(stacked.data(), dim, stacked.size() / dim));
  }

  Index dim() const { return samples_.rows(); }
  Index horizon() const { return samples_.cols() - 1; }
  Index steps() const { return samples_.cols(); }

  const Matrix& samples() const { return samples_; }
  auto sample(Index t) const { return samples_.col(t); }

  Vector stacked() const {
    return Eigen::Map<const Vector>(samples_.data(), samples_.size());
  }

 private:
  Matrix samples_;
};

/// Block lower-triangular Toeplitz operator mapping a stacked input sequence
/// to the stacked output sequence of a linear system over a finite horizon.
/// Block (i, j) equals D on the diagonal and C A^{i-j-1} B below it.
template <typename Scalar>
class LiftedOperator {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  LiftedOperator(Matrix matrix, Index horizon, Index block_rows, Index block_cols)
      : matrix_(std::move(matrix)), horizon_(horizon),
        block_rows_(block_rows), block_cols_(block_cols) {
    if (matrix_.rows() != (horizon_ + 1) * block_rows_ ||
        matrix_.cols() != (horizon_ + 1) * block_cols_)
      throw DimensionError("LiftedOperator: matrix size does not match horizon and block sizes");
  }

  const Matrix& matrix() const { return matrix_; }
  Index horizon() const { return horizon_; }
  Index block_rows() const { return block_rows_; }
  Index block_cols() const { return block_cols_; }
  Index rows() const { return matrix_.rows(); }
  Index cols() const { return matrix_.cols(); }

  Matrix block(Index i, Index j) const {
    return matrix_.block(i * block_rows_, j * block_cols_, block_rows_, block_cols_);
  }

  Vector apply(const Vector& stacked_input) const {
    if (stacked_input.size() != cols())
      throw DimensionError("LiftedOperator::apply: stacked input has length " +
                           std::to_string(stacked_input.size()) + ", expected " +
                           std::to_string(cols()));
    return matrix_ * stacked_input;
  }

  Trajectory<Scalar> apply(const Trajectory<Scalar>& input) const {
    return Trajectory<Scalar>::FromStacked(apply(input.stacked()), block_rows_);
  }

 private:
  Matrix matrix_;
  Index horizon_;
  Index block_rows_, block_cols_;
};

/// Builds the lifted operator of `model` over horizon T >= 0. Markov blocks
/// are accumulated by iterated multiplication with A; no eigendecomposition.
template <typename Scalar>
LiftedOperator<Scalar> lift(const StateSpaceModel<Scalar>& model, Index horizon) {
  if (horizon < 0) throw DomainError("lift: horizon must be nonnegative");
  const Index m = model.input_dim();
  const Index q = model.output_dim();
  const Index steps = horizon + 1;

  MatrixX<Scalar> result = MatrixX<Scalar>::Zero(steps * q, steps * m);
  // first block column: D, CB, CAB, ..., CA^{T-1}B
  MatrixX<Scalar> reachability = model.B();
  result.block(0, 0, q, m) = model.D();
  for (Index k = 1; k < steps; ++k) {
    result.block(k * q, 0, q, m) = model.C() * reachability;
    reachability = model.A() * reachability;
  }
  // remaining block columns repeat the first one shifted down (Toeplitz)
  for (Index j = 1; j < steps; ++j)
    result.block(j * q, j * m, (steps - j) * q, m) = result.block(0, 0, (steps - j) * q, m);
  return LiftedOperator<Scalar>(std::move(result), horizon, q, m);
}

/// Runs the exact state recursion from `x0` (zero by default) and returns the
/// output trajectory over the input's horizon.
template <typename Scalar>
Trajectory<Scalar> simulate(const StateSpaceModel<Scalar>& model,
                            const Trajectory<Scalar>& input,
                            const VectorX<Scalar>& x0) {
  if (input.dim() != model.input_dim())
    throw DimensionError("simulate: input trajectory dimension " +
                         std::to_string(input.dim()) + " does not match model input dimension " +
                         std::to_string(model.input_dim()));
  if (x0.size() != model.state_dim())
    throw DimensionError("simulate: initial state has wrong dimension");

  MatrixX<Scalar> outputs(model.output_dim(), input.steps());
  VectorX<Scalar> x = x0;
  for (Index t = 0; t < input.steps(); ++t) {
    outputs.col(t) = model.C() * x + model.D() * input.sample(t);
    x = model.A() * x + model.B() * input.sample(t);
  }
  return Trajectory<Scalar>(std::move(outputs));
}

template <typename Scalar>
Trajectory<Scalar> simulate(const StateSpaceModel<Scalar>& model,
                            const Trajectory<Scalar>& input) {
  return simulate(model, input, VectorX<Scalar>(VectorX<Scalar>::Zero(model.state_dim())));
}

/// Feedback interconnection of a strictly proper plant with a strictly proper
/// controller driven by the tracking error. The combined state is
/// [plant state; controller state]; the external input is the (possibly
/// noise-perturbed) reference.
template <typename Scalar>
class ClosedLoopModel {
 public:
  using Matrix = MatrixX<Scalar>;

  ClosedLoopModel(Matrix A, Matrix B, Matrix C, Index plant_states)
      : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), plant_states_(plant_states) {}

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  Index state_dim() const { return A_.rows(); }
  Index plant_state_dim() const { return plant_states_; }

  /// Reference-plus-noise to plant output.
  StateSpaceModel<Scalar> output_model() const {
    return StateSpaceModel<Scalar>(A_, B_, C_, Matrix::Zero(C_.rows(), B_.cols()));
  }

  /// Injected noise to tracking error (the noise enters the loop but not the
  /// error's feedthrough term).
  StateSpaceModel<Scalar> error_noise_model() const {
    return StateSpaceModel<Scalar>(A_, B_, -C_, Matrix::Zero(C_.rows(), B_.cols()));
  }

  /// Reference to tracking error e = r - y_p.
  StateSpaceModel<Scalar> error_reference_model() const {
    return StateSpaceModel<Scalar>(A_, B_, -C_, Matrix::Identity(C_.rows(), B_.cols()));
  }

  /// Largest eigenvalue magnitude of the closed-loop transition matrix.
  Scalar spectral_radius() const {
    return A_.eigenvalues().cwiseAbs().maxCoeff();
  }

 private:
  Matrix A_, B_, C_;
  Index plant_states_;
};

/// Interconnects plant and controller: the controller is driven by the
/// difference between the external input and the plant output, and its output
/// drives the plant. The plant must have zero feedthrough.
template <typename Scalar>
ClosedLoopModel<Scalar> close_loop(const StateSpaceModel<Scalar>& plant,
                                   const StateSpaceModel<Scalar>& controller) {
  if (plant.output_dim() != controller.input_dim())
    throw DimensionError("close_loop: plant output dimension must equal controller input dimension");
  if (controller.output_dim() != plant.input_dim())
    throw DimensionError("close_loop: controller output dimension must equal plant input dimension");
  if (!plant.D().isZero(Scalar(0)))
    throw DomainError("close_loop: plant feedthrough must be zero");

  const Index np = plant.state_dim();
  const Index nc = controller.state_dim();
  const Index q = plant.output_dim();

  MatrixX<Scalar> A(np + nc, np + nc);
  A.topLeftCorner(np, np) = plant.A();
  A.topRightCorner(np, nc) = plant.B() * controller.C();
  A.bottomLeftCorner(nc, np) = -controller.B() * plant.C();
  A.bottomRightCorner(nc, nc) = controller.A();

  MatrixX<Scalar> B = MatrixX<Scalar>::Zero(np + nc, q);
  B.bottomRows(nc) = controller.B();

  MatrixX<Scalar> C = MatrixX<Scalar>::Zero(q, np + nc);
  C.leftCols(np) = plant.C();

  return ClosedLoopModel<Scalar>(std::move(A), std::move(B), std::move(C), np);
}

/// Largest singular value of the frequency response C (e^{i lambda} I - A)^{-1} B + D
/// at each requested frequency in [0, pi). Frequencies at which the resolvent
/// is singular yield NaN entries; the remaining entries are still computed.
template <typename Scalar>
VectorX<Scalar> bode_gain(const StateSpaceModel<Scalar>& model,
                          const VectorX<Scalar>& frequencies) {
  using Complex = std::complex<Scalar>;
  using MatrixC = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

  const Index n = model.state_dim();
  VectorX<Scalar> gains(frequencies.size());
  for (Index i = 0; i < frequencies.size(); ++i) {
    const Complex z = std::polar(Scalar(1), frequencies[i]);
    MatrixC resolvent_arg = -model.A().template cast<Complex>();
    resolvent_arg.diagonal().array() += z;
    Eigen::FullPivLU<MatrixC> lu(resolvent_arg);
    if (n > 0 && !lu.isInvertible()) {
      gains[i] = std::numeric_limits<Scalar>::quiet_NaN();
      continue;
    }
    const MatrixC response =
        model.C().template cast<Complex>() * lu.solve(model.B().template cast<Complex>()) +
        model.D().template cast<Complex>();
    gains[i] = Eigen::JacobiSVD<MatrixC>(response).singularValues()(0);
  }
  return gains;
}

}  // namespace dplds
