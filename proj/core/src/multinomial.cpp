#include "timediff/multinomial.hpp"

#include <cmath>

#include "timediff/error.hpp"

namespace timediff {

std::vector<int> OneHotSequence::categories() const {
  std::vector<int> k;
  k.reserve(channels.size());
  for (const auto& ch : channels) k.push_back(static_cast<int>(ch.rows()));
  return k;
}

namespace {

void require_same_layout(const OneHotSequence& a, const OneHotSequence& b, const char* op) {
  bool ok = a.channels.size() == b.channels.size();
  for (std::size_t p = 0; ok && p < a.channels.size(); ++p) {
    ok = a.channels[p].rows() == b.channels[p].rows() && a.channels[p].cols() == b.channels[p].cols();
  }
  if (!ok) throw InvalidArgument(std::string(op) + ": lattice layouts differ");
}

void require_same_layout(const OneHotSequence& a, const CategoryLogits& logits, const char* op) {
  bool ok = a.channels.size() == logits.size();
  for (std::size_t p = 0; ok && p < logits.size(); ++p) {
    ok = a.channels[p].rows() == logits[p].rows() && a.channels[p].cols() == logits[p].cols();
  }
  if (!ok) throw InvalidArgument(std::string(op) + ": logits layout differs from lattice");
}

// mix * probs + (1 - mix) / K, channel-wise.
OneHotSequence mix_with_uniform(const OneHotSequence& in, double mix) {
  OneHotSequence out;
  out.channels.reserve(in.channels.size());
  for (const auto& ch : in.channels) {
    const double k = static_cast<double>(ch.rows());
    out.channels.push_back((mix * ch.array() + (1.0 - mix) / k).matrix());
  }
  out.hard = false;
  return out;
}

}  // namespace

OneHotSequence one_hot_encode(const CategoryMatrix& c, std::span<const int> num_categories) {
  if (static_cast<std::size_t>(c.rows()) != num_categories.size()) {
    throw InvalidArgument("one_hot_encode: category count list does not match channel count");
  }
  OneHotSequence out;
  out.hard = true;
  out.channels.reserve(num_categories.size());
  for (Eigen::Index p = 0; p < c.rows(); ++p) {
    const int k = num_categories[static_cast<std::size_t>(p)];
    if (k < 1) throw InvalidArgument("one_hot_encode: category count must be positive");
    Eigen::MatrixXd ch = Eigen::MatrixXd::Zero(k, c.cols());
    for (Eigen::Index l = 0; l < c.cols(); ++l) {
      const int v = c(p, l);
      if (v < 0 || v >= k) {
        throw InvalidArgument("one_hot_encode: category " + std::to_string(v) + " at channel " +
                              std::to_string(p) + ", step " + std::to_string(l) + " outside [0, " +
                              std::to_string(k) + ")");
      }
      ch(v, l) = 1.0;
    }
    out.channels.push_back(std::move(ch));
  }
  return out;
}

OneHotSequence one_hot_encode(const CategoryMatrix& c, int num_categories) {
  std::vector<int> k(static_cast<std::size_t>(c.rows()), num_categories);
  return one_hot_encode(c, k);
}

CategoryMatrix one_hot_decode(const OneHotSequence& seq) {
  CategoryMatrix c(seq.num_channels(), seq.length());
  for (int p = 0; p < seq.num_channels(); ++p) {
    const auto& ch = seq.channels[static_cast<std::size_t>(p)];
    for (Eigen::Index l = 0; l < ch.cols(); ++l) {
      Eigen::Index best = 0;
      ch.col(l).maxCoeff(&best);
      c(p, l) = static_cast<int>(best);
    }
  }
  return c;
}

std::vector<std::string> check_lattice(const OneHotSequence& seq, double tol) {
  std::vector<std::string> problems;
  for (std::size_t p = 0; p < seq.channels.size(); ++p) {
    const auto& ch = seq.channels[p];
    for (Eigen::Index l = 0; l < ch.cols(); ++l) {
      const auto col = ch.col(l);
      const std::string where = "channel " + std::to_string(p) + " step " + std::to_string(l);
      if ((col.array() < 0.0).any()) problems.push_back(where + ": negative entry");
      if (std::abs(col.sum() - 1.0) > tol) problems.push_back(where + ": slice does not sum to 1");
      if (seq.hard) {
        const auto ones = (col.array() == 1.0).count();
        const auto zeros = (col.array() == 0.0).count();
        if (ones != 1 || ones + zeros != col.size()) problems.push_back(where + ": not a basis vector");
      }
    }
  }
  return problems;
}

OneHotSequence q_forward_step_probs(const OneHotSequence& c_prev, int t, const DiffusionSchedule& schedule) {
  schedule.check_step(t);
  return mix_with_uniform(c_prev, 1.0 - schedule.beta_at(t));
}

OneHotSequence q_marginal_probs(const OneHotSequence& c0, int t, const DiffusionSchedule& schedule) {
  if (t == 0) return c0;
  schedule.check_step(t);
  return mix_with_uniform(c0, schedule.alpha_bar_at(t));
}

CategoricalPosterior q_posterior(const OneHotSequence& c_t, const OneHotSequence& c0_est, int t,
                                 const DiffusionSchedule& schedule) {
  require_same_layout(c_t, c0_est, "q_posterior");
  schedule.check_step(t);
  const OneHotSequence from_t = mix_with_uniform(c_t, schedule.alpha_at(t));
  const OneHotSequence from_0 = mix_with_uniform(c0_est, schedule.alpha_bar_prev(t));
  CategoricalPosterior post;
  post.phi.reserve(c_t.channels.size());
  post.normalized.reserve(c_t.channels.size());
  for (std::size_t p = 0; p < c_t.channels.size(); ++p) {
    Eigen::MatrixXd phi = from_t.channels[p].cwiseProduct(from_0.channels[p]);
    Eigen::MatrixXd norm = phi;
    for (Eigen::Index l = 0; l < phi.cols(); ++l) {
      const double s = phi.col(l).sum();
      if (!(s > 0.0)) {
        throw ContractViolation("q_posterior: zero-mass slice at channel " + std::to_string(p) + ", step " +
                                std::to_string(l));
      }
      norm.col(l) /= s;
    }
    post.phi.push_back(std::move(phi));
    post.normalized.push_back(std::move(norm));
  }
  return post;
}

OneHotSequence softmax(const CategoryLogits& logits) {
  OneHotSequence out;
  out.channels.reserve(logits.size());
  for (std::size_t p = 0; p < logits.size(); ++p) {
    const auto& z = logits[p];
    if (!z.allFinite()) throw InvalidArgument("softmax: non-finite logits in channel " + std::to_string(p));
    Eigen::MatrixXd s(z.rows(), z.cols());
    for (Eigen::Index l = 0; l < z.cols(); ++l) {
      const double m = z.col(l).maxCoeff();
      s.col(l) = (z.col(l).array() - m).exp().matrix();
      s.col(l) /= s.col(l).sum();
    }
    out.channels.push_back(std::move(s));
  }
  return out;
}

OneHotSequence sample_categorical(const OneHotSequence& probs, nn::RngStream& rng) {
  OneHotSequence out;
  out.hard = true;
  out.channels.reserve(probs.channels.size());
  for (const auto& ch : probs.channels) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(ch.rows(), ch.cols());
    for (Eigen::Index l = 0; l < ch.cols(); ++l) {
      const double u = rng.uniform() * ch.col(l).sum();
      double acc = 0.0;
      Eigen::Index k = 0;
      for (; k < ch.rows() - 1; ++k) {
        acc += ch(k, l);
        if (u < acc) break;
      }
      h(k, l) = 1.0;
    }
    out.channels.push_back(std::move(h));
  }
  return out;
}

OneHotSequence p_sample_step_discrete(const OneHotSequence& c_t, const CategoryLogits& logits, int t,
                                      const DiffusionSchedule& schedule, nn::RngStream& rng) {
  require_same_layout(c_t, logits, "p_sample_step_discrete");
  const OneHotSequence c0_est = softmax(logits);
  CategoricalPosterior post = q_posterior(c_t, c0_est, t, schedule);
  OneHotSequence probs;
  probs.channels = std::move(post.normalized);
  if (t > 1) return sample_categorical(probs, rng);
  // Final step is deterministic: argmax of the posterior.
  OneHotSequence out;
  out.hard = true;
  for (const auto& ch : probs.channels) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(ch.rows(), ch.cols());
    for (Eigen::Index l = 0; l < ch.cols(); ++l) {
      Eigen::Index best = 0;
      ch.col(l).maxCoeff(&best);
      h(best, l) = 1.0;
    }
    out.channels.push_back(std::move(h));
  }
  return out;
}

DiscreteLoss loss_discrete_with_grad(const OneHotSequence& c0, const OneHotSequence& c_t,
                                     const CategoryLogits& logits, int t, const DiffusionSchedule& schedule) {
  require_same_layout(c0, c_t, "loss_discrete");
  require_same_layout(c0, logits, "loss_discrete");
  schedule.check_step(t);

  const OneHotSequence s = softmax(logits);
  const double a_t = schedule.alpha_at(t);
  const double abar_prev = schedule.alpha_bar_prev(t);

  DiscreteLoss out;
  out.grad_logits.reserve(logits.size());
  std::size_t slices = 0;
  for (const auto& ch : c0.channels) slices += static_cast<std::size_t>(ch.cols());
  if (slices == 0) {
    for (const auto& z : logits) out.grad_logits.push_back(Eigen::MatrixXd::Zero(z.rows(), z.cols()));
    return out;
  }
  const double inv_slices = 1.0 / static_cast<double>(slices);

  // The true posterior q is only needed for t >= 2.
  CategoricalPosterior q;
  if (t > 1) q = q_posterior(c_t, c0, t, schedule);

  double total = 0.0;
  for (std::size_t p = 0; p < c0.channels.size(); ++p) {
    const Eigen::Index k = c0.channels[p].rows();
    const double inv_k = 1.0 / static_cast<double>(k);
    Eigen::MatrixXd grad(k, c0.channels[p].cols());
    Eigen::VectorXd a(k), theta(k), phi(k), prob(k), g(k);
    for (Eigen::Index l = 0; l < c0.channels[p].cols(); ++l) {
      a = (a_t * c_t.channels[p].col(l).array() + (1.0 - a_t) * inv_k).matrix();
      theta = (abar_prev * s.channels[p].col(l).array() + (1.0 - abar_prev) * inv_k).matrix();
      phi = a.cwiseProduct(theta);
      const double z = phi.sum();
      prob = phi / z;

      // g = d(slice loss)/d(prob)
      if (t > 1) {
        const auto qcol = q.normalized[p].col(l);
        double kl = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
          kl += qcol(j) * (std::log(qcol(j) + kLogFloor) - std::log(prob(j) + kLogFloor));
          g(j) = -qcol(j) / (prob(j) + kLogFloor);
        }
        total += kl;
      } else {
        Eigen::Index target = 0;
        c0.channels[p].col(l).maxCoeff(&target);
        total += -std::log(prob(target) + kLogFloor);
        g.setZero();
        g(target) = -1.0 / (prob(target) + kLogFloor);
      }

      // prob = phi / sum(phi)  ->  d/dphi
      const double gp = g.dot(prob);
      Eigen::VectorXd d_phi = (g.array() - gp).matrix() / z;
      // phi = a .* theta, theta = abar_prev * softmax + const
      Eigen::VectorXd d_soft = abar_prev * a.cwiseProduct(d_phi);
      const auto sm = s.channels[p].col(l);
      const double sg = sm.dot(d_soft);
      grad.col(l) = (sm.array() * (d_soft.array() - sg)).matrix() * inv_slices;
    }
    out.grad_logits.push_back(std::move(grad));
  }
  out.value = total * inv_slices;
  return out;
}

double loss_discrete(const OneHotSequence& c0, const OneHotSequence& c_t, const CategoryLogits& logits, int t,
                     const DiffusionSchedule& schedule) {
  return loss_discrete_with_grad(c0, c_t, logits, t, schedule).value;
}

}  // namespace timediff
