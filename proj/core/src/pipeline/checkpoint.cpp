#include "timediff/pipeline/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "timediff/data/csv.hpp"
#include "timediff/denoiser.hpp"
#include "timediff/error.hpp"

namespace timediff::pipeline {

namespace {

constexpr char kMagic[8] = {'T', 'D', 'I', 'F', 'F', 'C', 'K', '\0'};

enum class Kind : std::uint8_t { f64 = 1, u64 = 2, text = 3 };

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffU);
  os.write(b, 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffU);
  os.write(b, 4);
}

class Writer {
 public:
  void tensor(const std::string& name, const Eigen::MatrixXd& m) {
    Entry& e = add(name, Kind::f64);
    put_u64(e.payload, static_cast<std::uint64_t>(m.rows()));
    put_u64(e.payload, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.size(); ++k) put_u64(e.payload, std::bit_cast<std::uint64_t>(m.data()[k]));
  }
  void doubles(const std::string& name, const std::vector<double>& v) {
    tensor(name, Eigen::Map<const Eigen::MatrixXd>(v.data(), static_cast<Eigen::Index>(v.size()), 1));
  }
  void integers(const std::string& name, const std::vector<std::uint64_t>& v) {
    Entry& e = add(name, Kind::u64);
    put_u64(e.payload, v.size());
    for (auto x : v) put_u64(e.payload, x);
  }
  void text(const std::string& name, const std::string& s) {
    Entry& e = add(name, Kind::text);
    put_u64(e.payload, s.size());
    e.payload.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void params(const std::string& prefix, const nn::ParamStore& p) {
    for (std::size_t i = 0; i < p.size(); ++i) tensor(prefix + p.name(i), p[i]);
  }

  void finish(std::ostream& os) const {
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, Checkpoint::kFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
      put_u32(os, static_cast<std::uint32_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      os.put(static_cast<char>(e.kind));
      const std::string body = e.payload.str();
      put_u64(os, body.size());
      os.write(body.data(), static_cast<std::streamsize>(body.size()));
    }
  }

 private:
  struct Entry {
    std::string name;
    Kind kind;
    std::ostringstream payload;
  };
  Entry& add(const std::string& name, Kind kind) {
    auto& e = entries_.emplace_back();
    e.name = name;
    e.kind = kind;
    return e;
  }
  std::vector<Entry> entries_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) {
    char magic[8];
    read(is, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw ParseError("not a checkpoint file (bad magic)");
    const auto version = get_u32(is);
    if (version != Checkpoint::kFormatVersion) {
      throw ParseError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                       std::to_string(Checkpoint::kFormatVersion) + ")");
    }
    const auto count = get_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto name_len = get_u32(is);
      if (name_len > 4096) throw ParseError("corrupt checkpoint: entry name too long");
      std::string name(name_len, '\0');
      read(is, name.data(), name_len);
      const auto kind = static_cast<Kind>(is.get());
      const auto size = get_u64(is);
      if (size > (std::uint64_t{1} << 36)) throw ParseError("corrupt checkpoint: entry '" + name + "' too large");
      std::string body(size, '\0');
      read(is, body.data(), size);
      if (!entries_.emplace(name, std::make_pair(kind, std::move(body))).second) {
        throw ParseError("corrupt checkpoint: duplicate entry '" + name + "'");
      }
    }
  }

  Eigen::MatrixXd tensor(const std::string& name) const {
    std::istringstream is(body(name, Kind::f64));
    const auto rows = get_u64(is);
    const auto cols = get_u64(is);
    if (rows * cols * 8 + 16 != is.str().size()) throw ParseError("corrupt checkpoint: bad size for '" + name + "'");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = std::bit_cast<double>(get_u64(is));
    return m;
  }
  std::vector<double> doubles(const std::string& name) const {
    const auto m = tensor(name);
    return {m.data(), m.data() + m.size()};
  }
  std::vector<std::uint64_t> integers(const std::string& name) const {
    std::istringstream is(body(name, Kind::u64));
    const auto n = get_u64(is);
    if (n * 8 + 8 != is.str().size()) throw ParseError("corrupt checkpoint: bad size for '" + name + "'");
    std::vector<std::uint64_t> v(n);
    for (auto& x : v) x = get_u64(is);
    return v;
  }
  std::string text(const std::string& name) const {
    const std::string& b = body(name, Kind::text);
    if (b.size() < 8) throw ParseError("corrupt checkpoint: bad size for '" + name + "'");
    return b.substr(8);
  }
  void params(const std::string& prefix, nn::ParamStore& p) const {
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto m = tensor(prefix + p.name(i));
      if (m.rows() != p[i].rows() || m.cols() != p[i].cols()) {
        throw ParseError("checkpoint tensor '" + prefix + p.name(i) + "' has the wrong shape");
      }
      p[i] = std::move(m);
    }
  }

 private:
  static void read(std::istream& is, char* dst, std::uint64_t n) {
    is.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(is.gcount()) != n) throw ParseError("truncated checkpoint");
  }
  static std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    read(is, reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    return v;
  }
  static std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    read(is, reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
  }
  const std::string& body(const std::string& name, Kind kind) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw ParseError("checkpoint lacks entry '" + name + "'");
    if (it->second.first != kind) throw ParseError("checkpoint entry '" + name + "' has the wrong kind");
    return it->second.second;
  }

  std::map<std::string, std::pair<Kind, std::string>> entries_;
};

std::vector<std::uint64_t> as_u64(const std::vector<int>& v) { return {v.begin(), v.end()}; }

std::vector<int> as_int(const std::vector<std::uint64_t>& v) {
  std::vector<int> out;
  for (auto x : v) {
    if (x > 1u << 20) throw ParseError("corrupt checkpoint: implausible layout value");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& c) {
  Writer w;
  w.text("config", c.config.to_text());
  const auto& d = c.layout.data;
  w.integers("layout.data", {static_cast<std::uint64_t>(d.numeric_channels), static_cast<std::uint64_t>(d.length),
                             static_cast<std::uint64_t>(d.categorical_channels)});
  w.integers("layout.data.categories", as_u64(d.categories));
  const auto& s = c.layout.shape;
  w.integers("layout.shape", {static_cast<std::uint64_t>(s.numeric_channels), static_cast<std::uint64_t>(s.hidden),
                              static_cast<std::uint64_t>(s.embed_width), static_cast<std::uint64_t>(s.layers)});
  w.integers("layout.shape.categories", as_u64(s.categories));
  w.doubles("stats.min", c.stats.min);
  w.doubles("stats.max", c.stats.max);
  w.doubles("stats.mean", c.stats.mean);
  w.doubles("schedule.beta", c.schedule.beta);
  w.doubles("schedule.alpha", c.schedule.alpha);
  w.doubles("schedule.alpha_bar", c.schedule.alpha_bar);
  w.doubles("schedule.posterior_var", c.schedule.posterior_var);
  w.params("param/", c.params);
  w.params("ema/", c.ema);
  w.params("adam.m/", c.optimizer.first_moment);
  w.params("adam.v/", c.optimizer.second_moment);
  w.integers("adam.step", {static_cast<std::uint64_t>(c.optimizer.step)});
  w.integers("rng", {c.rng_data, c.rng_gaussian, c.rng_categorical});
  w.integers("step", {static_cast<std::uint64_t>(c.step)});
  w.doubles("loss_history", c.loss_history);
  w.integers("corpus_digest", {c.corpus_digest});
  w.finish(os);
}

Checkpoint read_checkpoint(std::istream& is) {
  const Reader r(is);
  Checkpoint c;
  {
    std::istringstream cfg(r.text("config"));
    c.config = TrainConfig::from_key_values(data::read_key_values(cfg));
  }
  const auto d = as_int(r.integers("layout.data"));
  const auto s = as_int(r.integers("layout.shape"));
  if (d.size() != 3 || s.size() != 4) throw ParseError("corrupt checkpoint: bad layout record");
  c.layout.mode = c.config.discrete_mode;
  c.layout.data.numeric_channels = d[0];
  c.layout.data.length = d[1];
  c.layout.data.categorical_channels = d[2];
  c.layout.data.categories = as_int(r.integers("layout.data.categories"));
  c.layout.shape.numeric_channels = s[0];
  c.layout.shape.hidden = s[1];
  c.layout.shape.embed_width = s[2];
  c.layout.shape.layers = s[3];
  c.layout.shape.categories = as_int(r.integers("layout.shape.categories"));
  try {
    c.layout.shape.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("corrupt checkpoint: ") + e.what());
  }
  c.stats.min = r.doubles("stats.min");
  c.stats.max = r.doubles("stats.max");
  c.stats.mean = r.doubles("stats.mean");
  c.schedule.beta = r.doubles("schedule.beta");
  c.schedule.alpha = r.doubles("schedule.alpha");
  c.schedule.alpha_bar = r.doubles("schedule.alpha_bar");
  c.schedule.posterior_var = r.doubles("schedule.posterior_var");
  c.schedule.total_steps = static_cast<int>(c.schedule.beta.size());
  if (!validate(c.schedule).empty()) throw ParseError("corrupt checkpoint: stored schedule fails validation");

  const Denoiser denoiser(c.layout.shape);
  c.params = denoiser.make_params();
  c.ema = c.params.zeros_like();
  c.optimizer.first_moment = c.params.zeros_like();
  c.optimizer.second_moment = c.params.zeros_like();
  r.params("param/", c.params);
  r.params("ema/", c.ema);
  r.params("adam.m/", c.optimizer.first_moment);
  r.params("adam.v/", c.optimizer.second_moment);
  auto single = [&](const std::string& name) {
    const auto v = r.integers(name);
    if (v.size() != 1) throw ParseError("corrupt checkpoint: bad '" + name + "' record");
    return v[0];
  };
  c.optimizer.step = static_cast<std::int64_t>(single("adam.step"));
  const auto rng = r.integers("rng");
  if (rng.size() != 3) throw ParseError("corrupt checkpoint: bad rng record");
  c.rng_data = rng[0];
  c.rng_gaussian = rng[1];
  c.rng_categorical = rng[2];
  c.step = static_cast<std::int64_t>(single("step"));
  c.loss_history = r.doubles("loss_history");
  c.corpus_digest = single("corpus_digest");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + tmp.string() + "' for writing");
    write_checkpoint(os, ckpt);
    os.flush();
    if (!os) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(is);
}

}  // namespace timediff::pipeline
