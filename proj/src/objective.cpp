#include "smoothgev/objective.hpp"

#include <cmath>
#include <limits>

#include "smoothgev/errors.hpp"
#include "smoothgev/parallel.hpp"

namespace smoothgev {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> local_coefficients(const Eigen::VectorXd& theta, const std::array<int, kMaxLocal>& map,
                                       int size) {
  std::vector<double> c(static_cast<std::size_t>(size));
  for (int s = 0; s < size; ++s) c[static_cast<std::size_t>(s)] = theta[map[s]];
  return c;
}

}  // namespace

PenalizedProblem::PenalizedProblem(const GriddedDataset& data, const ModelFrame& frame,
                                   const PenaltyMatrix& penalty, unsigned threads)
    : layout_(frame.spec, data.n_boxes(), frame.beta_active),
      frame_(frame),
      penalty_(penalty),
      threads_(threads) {
  if (penalty.size() != data.n_boxes()) throw ValidationError("penalty matrix does not match the grid");
  if (frame.n_boxes() != data.n_boxes() || frame.n_years() != data.n_years())
    throw ValidationError("model frame does not match the dataset");
  boxes_.resize(data.n_boxes());
  for (std::size_t i = 0; i < data.n_boxes(); ++i) {
    for (std::size_t t = 0; t < data.n_years(); ++t) {
      if (data.missing(i, t)) continue;
      boxes_[i].t.push_back(t);
      boxes_[i].x.push_back(frame.covariate.at(t));
      boxes_[i].y.push_back(data.txx(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)));
    }
    n_obs_ += boxes_[i].y.size();
  }
}

double PenalizedProblem::loglik(const Eigen::VectorXd& theta) const {
  std::vector<double> per_box(boxes_.size());
  parallel_for(boxes_.size(), threads_, [&](std::size_t i) {
    const BoxDesign d = layout_.box_design(i, frame_.elevation_centered[i]);
    const auto c = local_coefficients(theta, layout_.local_to_global(i), d.size);
    per_box[i] = box_loglik(d, c, boxes_[i].y, boxes_[i].x);
  });
  double total = 0.0;
  for (double v : per_box) {
    if (v == kNegInf) return kNegInf;
    total += v;
  }
  return total;
}

double PenalizedProblem::penalty(const Eigen::VectorXd& theta, std::span<const double> lambdas) const {
  if (lambdas.size() != n_lambdas()) throw ValidationError("wrong number of smoothing parameters");
  const auto n = static_cast<Eigen::Index>(layout_.n_boxes());
  double total = 0.0;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (lambdas[k] == 0.0) continue;
    const Eigen::VectorXd v = theta.segment(layout_.offset(layout_.fields()[k]), n);
    total += lambdas[k] * penalty_.quadratic_form(v);
  }
  return total;
}

double PenalizedProblem::value(const Eigen::VectorXd& theta, std::span<const double> lambdas) const {
  const double ll = loglik(theta);
  if (ll == kNegInf) return kNegInf;
  return ll - penalty(theta, lambdas);
}

Eigen::SparseMatrix<double> PenalizedProblem::penalty_hessian(std::span<const double> lambdas) const {
  if (lambdas.size() != n_lambdas()) throw ValidationError("wrong number of smoothing parameters");
  const auto dim = static_cast<Eigen::Index>(layout_.dim());
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    const int off = layout_.offset(layout_.fields()[k]);
    for (int col = 0; col < penalty_.S.outerSize(); ++col)
      for (Eigen::SparseMatrix<double>::InnerIterator it(penalty_.S, col); it; ++it)
        trips.emplace_back(off + it.row(), off + it.col(), 2.0 * lambdas[k] * it.value());
  }
  Eigen::SparseMatrix<double> p(dim, dim);
  p.setFromTriplets(trips.begin(), trips.end());
  return p;
}

PenalizedProblem::Evaluation PenalizedProblem::evaluate(const Eigen::VectorXd& theta,
                                                        std::span<const double> lambdas) const {
  Evaluation ev;
  const auto dim = static_cast<Eigen::Index>(layout_.dim());
  struct BoxPart {
    double value;
    LocalVector g;
    LocalMatrix h;
  };
  std::vector<BoxPart> parts(boxes_.size());
  parallel_for(boxes_.size(), threads_, [&](std::size_t i) {
    const BoxDesign d = layout_.box_design(i, frame_.elevation_centered[i]);
    const auto c = local_coefficients(theta, layout_.local_to_global(i), d.size);
    parts[i].value = box_loglik(d, c, boxes_[i].y, boxes_[i].x, &parts[i].g, &parts[i].h);
  });

  ev.gradient = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(boxes_.size() * 36);
  double ll = 0.0;
  for (std::size_t i = 0; i < boxes_.size(); ++i) {
    if (parts[i].value == kNegInf) {
      ev.feasible = false;
      ev.value = ev.loglik = kNegInf;
      return ev;
    }
    ll += parts[i].value;
    const auto map = layout_.local_to_global(i);
    const auto size = parts[i].g.size();
    for (Eigen::Index a = 0; a < size; ++a) {
      ev.gradient[map[a]] += parts[i].g[a];
      for (Eigen::Index b = 0; b < size; ++b) trips.emplace_back(map[a], map[b], -parts[i].h(a, b));
    }
  }
  ev.neg_hess_loglik.resize(dim, dim);
  ev.neg_hess_loglik.setFromTriplets(trips.begin(), trips.end());

  const auto n = static_cast<Eigen::Index>(layout_.n_boxes());
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (lambdas[k] == 0.0) continue;
    const int off = layout_.offset(layout_.fields()[k]);
    const Eigen::VectorXd v = theta.segment(off, n);
    ev.gradient.segment(off, n) -= 2.0 * lambdas[k] * penalty_.apply(v);
  }
  ev.loglik = ll;
  ev.value = ll - penalty(theta, lambdas);
  return ev;
}

ObjectiveValue penalized_objective(const ParameterField& field, const ModelFrame& frame,
                                   const GriddedDataset& data, const PenaltyMatrix& penalty,
                                   std::span<const double> lambdas) {
  check_shapes(field, frame.spec, data.n_boxes());
  const PenalizedProblem problem(data, frame, penalty);
  const Eigen::VectorXd theta = problem.layout().pack(field);
  const auto ev = problem.evaluate(theta, lambdas);
  ObjectiveValue out;
  out.value = ev.value;
  if (!ev.feasible) return out;
  out.gradient = ev.gradient;
  out.hessian = -(ev.neg_hess_loglik + problem.penalty_hessian(lambdas));
  return out;
}

}  // namespace smoothgev
