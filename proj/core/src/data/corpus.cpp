#include "timediff/data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "timediff/error.hpp"
#include "timediff/nn/rng.hpp"

namespace timediff::data {

void Corpus::check() const {
  for (const auto& s : samples) {
    const std::string who = "sample " + std::to_string(s.id);
    if (s.values.rows() != numeric_channels || s.values.cols() != length)
      throw InvalidArgument(who + ": numeric block shape mismatch");
    if (s.mask.rows() != numeric_channels || s.mask.cols() != length)
      throw InvalidArgument(who + ": mask shape mismatch");
    if (s.categories.rows() != categorical_channels() || s.categories.cols() != length)
      throw InvalidArgument(who + ": categorical block shape mismatch");
    for (Eigen::Index p = 0; p < s.categories.rows(); ++p) {
      for (Eigen::Index l = 0; l < length; ++l) {
        const int c = s.categories(p, l);
        if (c < 0 || c >= categories[static_cast<std::size_t>(p)])
          throw InvalidArgument(who + ": category out of range in channel " + std::to_string(p));
      }
    }
  }
}

bool Corpus::same_layout(const Corpus& other) const {
  return numeric_channels == other.numeric_channels && length == other.length && categories == other.categories;
}

CorpusStats compute_stats(const Corpus& train) {
  const int p_r = train.numeric_channels;
  CorpusStats st;
  st.min.assign(static_cast<std::size_t>(p_r), std::numeric_limits<double>::infinity());
  st.max.assign(static_cast<std::size_t>(p_r), -std::numeric_limits<double>::infinity());
  st.mean.assign(static_cast<std::size_t>(p_r), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(p_r), 0);
  for (const auto& s : train.samples) {
    for (int p = 0; p < p_r; ++p) {
      const auto up = static_cast<std::size_t>(p);
      for (int l = 0; l < train.length; ++l) {
        if (s.mask(p, l) != 0) continue;
        const double v = s.values(p, l);
        st.min[up] = std::min(st.min[up], v);
        st.max[up] = std::max(st.max[up], v);
        st.mean[up] += v;
        ++count[up];
      }
    }
  }
  for (std::size_t p = 0; p < st.mean.size(); ++p) {
    if (count[p] == 0) {
      st.min[p] = st.max[p] = st.mean[p] = 0.0;
    } else {
      st.mean[p] /= static_cast<double>(count[p]);
      st.mean[p] = std::clamp(st.mean[p], st.min[p], st.max[p]);
    }
  }
  return st;
}

DerivedMask derive_mask(const Eigen::MatrixXd& raw) {
  DerivedMask d;
  d.mask.resize(raw.rows(), raw.cols());
  d.observed = raw;
  for (Eigen::Index p = 0; p < raw.rows(); ++p) {
    bool any_present = false;
    for (Eigen::Index l = 0; l < raw.cols(); ++l) {
      const bool missing = std::isnan(raw(p, l));
      d.mask(p, l) = missing ? 1 : 0;
      any_present = any_present || !missing;
    }
    if (!any_present && raw.cols() > 0) d.fully_missing_channels.push_back(static_cast<int>(p));
  }
  return d;
}

NumericMatrix impute_and_scale(const Eigen::MatrixXd& raw, const Eigen::MatrixXi& mask, const CorpusStats& stats) {
  if (raw.rows() != mask.rows() || raw.cols() != mask.cols())
    throw InvalidArgument("impute_and_scale: mask shape differs from values");
  if (raw.rows() != stats.channels()) throw InvalidArgument("impute_and_scale: stats channel count mismatch");
  NumericMatrix out(raw.rows(), raw.cols());
  for (Eigen::Index p = 0; p < raw.rows(); ++p) {
    const auto up = static_cast<std::size_t>(p);
    const double lo = stats.min[up];
    const double range = stats.max[up] - lo;
    for (Eigen::Index l = 0; l < raw.cols(); ++l) {
      const double v = mask(p, l) != 0 ? stats.mean[up] : raw(p, l);
      out(p, l) = range > 0.0 ? (v - lo) / range : 0.5;
    }
  }
  return out;
}

Eigen::MatrixXd descale(const NumericMatrix& scaled, const CorpusStats& stats) {
  if (scaled.rows() != stats.channels()) throw InvalidArgument("descale: stats channel count mismatch");
  Eigen::MatrixXd out(scaled.rows(), scaled.cols());
  for (Eigen::Index p = 0; p < scaled.rows(); ++p) {
    const auto up = static_cast<std::size_t>(p);
    const double lo = stats.min[up], hi = stats.max[up];
    for (Eigen::Index l = 0; l < scaled.cols(); ++l) {
      // Interpolating form: 0 and 1 map exactly onto min and max.
      const double s = scaled(p, l);
      out(p, l) = hi > lo ? (1.0 - s) * lo + s * hi : lo;
    }
  }
  return out;
}

EncodedLayout EncodedLayout::of(const Corpus& corpus) {
  EncodedLayout lay;
  lay.numeric_channels = corpus.numeric_channels;
  lay.length = corpus.length;
  lay.categorical_channels = corpus.categorical_channels();
  lay.categories = corpus.categories;
  lay.categories.insert(lay.categories.end(), static_cast<std::size_t>(corpus.numeric_channels), 2);
  return lay;
}

std::vector<EncodedSample> encode(const Corpus& corpus, const CorpusStats& stats) {
  std::vector<EncodedSample> out;
  out.reserve(corpus.size());
  const int p_d = corpus.categorical_channels();
  for (const auto& s : corpus.samples) {
    EncodedSample e;
    e.x0 = impute_and_scale(s.values, s.mask, stats);
    e.c0.resize(p_d + corpus.numeric_channels, corpus.length);
    if (p_d > 0) e.c0.topRows(p_d) = s.categories;
    if (corpus.numeric_channels > 0) e.c0.bottomRows(corpus.numeric_channels) = s.mask;
    out.push_back(std::move(e));
  }
  return out;
}

Corpus decode(const std::vector<EncodedSample>& encoded, const EncodedLayout& layout, const CorpusStats& stats) {
  Corpus c;
  c.numeric_channels = layout.numeric_channels;
  c.length = layout.length;
  c.categories.assign(layout.categories.begin(), layout.categories.begin() + layout.categorical_channels);
  c.samples.reserve(encoded.size());
  std::int64_t id = 0;
  for (const auto& e : encoded) {
    TimeSeriesSample s;
    s.id = id++;
    s.values = descale(e.x0.cwiseMax(0.0).cwiseMin(1.0), stats);
    s.categories = e.c0.topRows(layout.categorical_channels);
    s.mask = e.c0.bottomRows(layout.numeric_channels);
    for (Eigen::Index p = 0; p < s.values.rows(); ++p) {
      for (Eigen::Index l = 0; l < s.values.cols(); ++l) {
        if (s.mask(p, l) != 0) s.values(p, l) = std::numeric_limits<double>::quiet_NaN();
      }
    }
    c.samples.push_back(std::move(s));
  }
  return c;
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("split fraction must lie in [0, 1]");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = nn::RngStream::derive(seed, "split");
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  const auto n_first = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(order.size())));
  Corpus a, b;
  for (Corpus* c : {&a, &b}) {
    c->numeric_channels = corpus.numeric_channels;
    c->length = corpus.length;
    c->categories = corpus.categories;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_first ? a : b).samples.push_back(corpus.samples[order[i]]);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace timediff::data
