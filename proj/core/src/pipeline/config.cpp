#include "timediff/pipeline/config.hpp"

#include <charconv>
#include <sstream>

#include "timediff/data/csv.hpp"
#include "timediff/error.hpp"

namespace timediff::pipeline {

std::string to_string(DiscreteMode mode) {
  return mode == DiscreteMode::multinomial ? "multinomial" : "gaussian_rounding";
}

DiscreteMode parse_discrete_mode(const std::string& text) {
  if (text == "multinomial") return DiscreteMode::multinomial;
  if (text == "gaussian_rounding") return DiscreteMode::gaussian_rounding;
  throw ParseError("discrete_mode must be 'multinomial' or 'gaussian_rounding', got '" + text + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw InvalidArgument("config: " + what); };
  if (diffusion_steps < 2) fail("diffusion_steps must be at least 2");
  if (!(lambda >= 0.0)) fail("lambda must be non-negative");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("beta1 and beta2 must lie in [0, 1)");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) fail("ema_decay must lie in [0, 1)");
  if (accumulation < 1) fail("accumulation must be at least 1");
  if (batch < 1) fail("batch must be at least 1");
  if (layers < 1) fail("layers must be at least 1");
  if (hidden_multiple < 1) fail("hidden_multiple must be at least 1");
  if (embed_width < 2 || embed_width % 2 != 0) fail("embed_width must be a positive even number");
  if (steps < 0) fail("steps must be non-negative");
  if (checkpoint_every < 0 || log_every < 0) fail("checkpoint_every and log_every must be non-negative");
}

std::map<std::string, std::string> TrainConfig::to_key_values() const {
  using data::format_double;
  return {
      {"corpus", corpus},
      {"diffusion_steps", std::to_string(diffusion_steps)},
      {"lambda", format_double(lambda)},
      {"learning_rate", format_double(learning_rate)},
      {"beta1", format_double(beta1)},
      {"beta2", format_double(beta2)},
      {"ema_decay", format_double(ema_decay)},
      {"accumulation", std::to_string(accumulation)},
      {"batch", std::to_string(batch)},
      {"layers", std::to_string(layers)},
      {"hidden_multiple", std::to_string(hidden_multiple)},
      {"embed_width", std::to_string(embed_width)},
      {"steps", std::to_string(steps)},
      {"seed", std::to_string(seed)},
      {"checkpoint", checkpoint},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"log_every", std::to_string(log_every)},
      {"discrete_mode", to_string(discrete_mode)},
  };
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : to_key_values()) os << k << '=' << v << '\n';
  return os.str();
}

namespace {

template <typename T>
T parse_as(const std::string& key, const std::string& value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ParseError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

}  // namespace

TrainConfig TrainConfig::from_key_values(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "corpus") c.corpus = v;
    else if (k == "diffusion_steps") c.diffusion_steps = parse_as<int>(k, v);
    else if (k == "lambda") c.lambda = parse_as<double>(k, v);
    else if (k == "learning_rate") c.learning_rate = parse_as<double>(k, v);
    else if (k == "beta1") c.beta1 = parse_as<double>(k, v);
    else if (k == "beta2") c.beta2 = parse_as<double>(k, v);
    else if (k == "ema_decay") c.ema_decay = parse_as<double>(k, v);
    else if (k == "accumulation") c.accumulation = parse_as<int>(k, v);
    else if (k == "batch") c.batch = parse_as<int>(k, v);
    else if (k == "layers") c.layers = parse_as<int>(k, v);
    else if (k == "hidden_multiple") c.hidden_multiple = parse_as<int>(k, v);
    else if (k == "embed_width") c.embed_width = parse_as<int>(k, v);
    else if (k == "steps") c.steps = parse_as<std::int64_t>(k, v);
    else if (k == "seed") c.seed = parse_as<std::uint64_t>(k, v);
    else if (k == "checkpoint") c.checkpoint = v;
    else if (k == "checkpoint_every") c.checkpoint_every = parse_as<std::int64_t>(k, v);
    else if (k == "log_every") c.log_every = parse_as<std::int64_t>(k, v);
    else if (k == "discrete_mode") c.discrete_mode = parse_discrete_mode(v);
    else throw ParseError("unknown config key '" + k + "'");
  }
  return c;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  return from_key_values(data::read_key_values(path));
}

}  // namespace timediff::pipeline
