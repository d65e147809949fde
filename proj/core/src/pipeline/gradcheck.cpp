#include "timediff/pipeline/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "timediff/denoiser.hpp"
#include "timediff/error.hpp"
#include "timediff/multinomial.hpp"
#include "timediff/pipeline/model.hpp"

namespace timediff::pipeline {

GradcheckResult gradcheck(const GradcheckOptions& o) {
  DenoiserShape shape;
  shape.numeric_channels = o.numeric_channels;
  shape.categories = o.categories;
  shape.hidden = o.hidden;
  shape.embed_width = o.embed_width;
  shape.layers = o.layers;
  shape.validate();
  if (o.length < 1 || o.batch < 1) throw InvalidArgument("gradcheck: length and batch must be positive");
  const Denoiser denoiser(shape);
  nn::ParamStore params = denoiser.make_params();
  GradcheckResult result;
  result.param_count = params.scalar_count();
  if (result.param_count >= o.max_params) {
    throw InvalidArgument("gradcheck: model has " + std::to_string(result.param_count) +
                          " parameters; finite differences are limited to fewer than " +
                          std::to_string(o.max_params) + ". Reduce --hidden, --embed-width or the channel counts.");
  }
  auto init_rng = nn::RngStream::derive(o.seed, nn::streams::kInit);
  denoiser.initialize(params, init_rng);
  // Move layernorm off its trivial initial point so its gradient is generic.
  for (const char* name : {"norm.gain", "norm.bias"}) {
    auto& m = params.at(name);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] += init_rng.uniform(-0.5, 0.5);
  }

  const auto schedule = cosine_schedule(o.diffusion_steps);
  auto data_rng = nn::RngStream::derive(o.seed, nn::streams::kData);
  auto gaussian_rng = nn::RngStream::derive(o.seed, nn::streams::kGaussian);
  auto categorical_rng = nn::RngStream::derive(o.seed, nn::streams::kCategorical);
  std::vector<ModelSample> data(static_cast<std::size_t>(o.batch));
  for (auto& s : data) {
    s.x0.resize(o.numeric_channels, o.length);
    for (Eigen::Index k = 0; k < s.x0.size(); ++k) s.x0.data()[k] = data_rng.uniform();
    CategoryMatrix c(static_cast<Eigen::Index>(o.categories.size()), o.length);
    for (Eigen::Index p = 0; p < c.rows(); ++p)
      for (Eigen::Index l = 0; l < c.cols(); ++l)
        c(p, l) = static_cast<int>(data_rng.uniform_index(static_cast<std::uint64_t>(o.categories[p])));
    s.c0 = one_hot_encode(c, o.categories);
  }
  const auto batch = draw_noised_batch(data, o.batch, schedule, data_rng, gaussian_rng, categorical_rng);
  const Eigen::MatrixXd input = denoiser.pack(batch.xt, batch.ct);
  auto loss_at = [&](const nn::ParamStore& p) {
    return diffusion_loss(denoiser, denoiser.forward(p, input, batch.t), batch, schedule, o.lambda).total;
  };

  DenoiserTrace trace;
  const Eigen::MatrixXd out = denoiser.forward(params, input, batch.t, &trace);
  const auto loss = diffusion_loss(denoiser, out, batch, schedule, o.lambda);
  nn::ParamStore grads = denoiser.backward(params, trace, loss.grad_output);

  const auto groups = denoiser.param_groups(params);
  if (!o.corrupt_group.empty()) {
    const auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.name == o.corrupt_group; });
    if (it == groups.end()) throw InvalidArgument("gradcheck: unknown group '" + o.corrupt_group + "'");
    for (const auto& sl : it->slices) {
      grads[sl.tensor].middleRows(sl.row_begin, sl.rows).array() *= 1.01;
      grads[sl.tensor].middleRows(sl.row_begin, sl.rows).array() += 1e-3;
    }
  }

  result.pass = true;
  for (const auto& g : groups) {
    GradcheckRow row;
    row.group = g.name;
    for (const auto& sl : g.slices) {
      auto& m = params[sl.tensor];
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = sl.row_begin; i < sl.row_begin + sl.rows; ++i) {
          const double saved = m(i, j);
          m(i, j) = saved + o.step;
          const double up = loss_at(params);
          m(i, j) = saved - o.step;
          const double down = loss_at(params);
          m(i, j) = saved;
          const double numeric = (up - down) / (2.0 * o.step);
          const double analytic = grads[sl.tensor](i, j);
          const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
          row.max_rel_error = std::max(row.max_rel_error, std::abs(analytic - numeric) / denom);
          ++row.coordinates;
        }
      }
    }
    row.pass = row.max_rel_error < o.tolerance;
    result.pass = result.pass && row.pass;
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace timediff::pipeline
