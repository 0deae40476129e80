#include "stethofed/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "stethofed/error.hpp"

namespace stethofed {
namespace {

std::uint64_t byteswap64(std::uint64_t v) {
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) {
    r = (r << 8) | (v & 0xffu);
    v >>= 8;
  }
  return r;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::vector<std::size_t> parse_shape(const std::string& s) {
  std::vector<std::size_t> shape;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) shape.push_back(std::stoull(part));
  return shape;
}

std::string expect_line(std::istream& in, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) {
    raise(ErrorKind::Format, "checkpoint truncated before " + std::string(what));
  }
  return line;
}

}  // namespace

void write_f64_le(std::ostream& out, std::span<const double> values) {
  std::vector<char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap64(bits);
    std::memcpy(buf.data() + i * 8, &bits, 8);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void read_f64_le(std::istream& in, std::span<double> values) {
  std::vector<char> buf(values.size() * 8);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
    raise(ErrorKind::Format, "binary payload truncated");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, buf.data() + i * 8, 8);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap64(bits);
    values[i] = std::bit_cast<double>(bits);
  }
}

void write_checkpoint(std::ostream& out, const FlatModel& m) {
  const auto& s = m.spec;
  std::ostringstream hdr;
  hdr << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  hdr << "spec freq_bins=" << s.freq_bins << " time_frames=" << s.time_frames
      << " pool_freq=" << s.pool_freq << " pool_time=" << s.pool_time << " hidden=" << s.hidden
      << " embed=" << s.embed << " classes=" << s.classes << " vocab=" << s.vocab
      << " leak_slope=" << std::setprecision(17) << s.leak_slope
      << " input_shift=" << s.input_shift << " input_scale=" << s.input_scale
      << " center_input=" << (s.center_input ? 1 : 0) << '\n';
  hdr << "params " << m.params.size() << '\n';
  for (const auto& e : m.params.registry().entries()) {
    hdr << "entry " << e.name << ' ' << e.offset << ' ' << shape_string(e.shape) << '\n';
  }
  hdr << "end\n";
  const auto text = hdr.str();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_f64_le(out, m.params.values());
}

FlatModel read_checkpoint(std::istream& in) {
  {
    std::istringstream magic(expect_line(in, "magic"));
    std::string tag;
    int version = 0;
    magic >> tag >> version;
    if (tag != kCheckpointMagic) raise(ErrorKind::Format, "not a checkpoint file");
    if (version != kCheckpointVersion) {
      raise(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
    }
  }
  ModelSpec spec;
  {
    std::istringstream line(expect_line(in, "spec"));
    std::string word;
    line >> word;
    if (word != "spec") raise(ErrorKind::Format, "expected spec line");
    std::map<std::string, std::string> kv;
    while (line >> word) {
      const auto eq = word.find('=');
      if (eq == std::string::npos) raise(ErrorKind::Format, "malformed spec field " + word);
      kv[word.substr(0, eq)] = word.substr(eq + 1);
    }
    auto get = [&](const char* key) -> const std::string& {
      auto it = kv.find(key);
      if (it == kv.end()) raise(ErrorKind::Format, std::string("spec missing ") + key);
      return it->second;
    };
    spec.freq_bins = std::stoull(get("freq_bins"));
    spec.time_frames = std::stoull(get("time_frames"));
    spec.pool_freq = std::stoull(get("pool_freq"));
    spec.pool_time = std::stoull(get("pool_time"));
    spec.hidden = std::stoull(get("hidden"));
    spec.embed = std::stoull(get("embed"));
    spec.classes = std::stoull(get("classes"));
    spec.vocab = std::stoull(get("vocab"));
    spec.leak_slope = std::stod(get("leak_slope"));
    spec.input_shift = std::stod(get("input_shift"));
    spec.input_scale = std::stod(get("input_scale"));
    spec.center_input = get("center_input") == "1";
  }
  std::size_t count = 0;
  {
    std::istringstream line(expect_line(in, "params"));
    std::string word;
    line >> word >> count;
    if (word != "params") raise(ErrorKind::Format, "expected params line");
  }
  Registry parsed;
  for (;;) {
    const auto text = expect_line(in, "registry");
    if (text == "end") break;
    std::istringstream line(text);
    std::string word, name, shape;
    std::size_t offset = 0;
    line >> word >> name >> offset >> shape;
    if (word != "entry") raise(ErrorKind::Format, "expected registry entry, got '" + text + "'");
    const auto& e = parsed.add(name, parse_shape(shape));
    if (e.offset != offset) raise(ErrorKind::Format, "registry offset mismatch for " + name);
  }
  auto reg = make_registry(spec);
  if (!(parsed == *reg) || count != reg->total()) {
    raise(ErrorKind::Format, "checkpoint registry does not match its model spec");
  }
  FlatModel m{spec, ParamVector(reg)};
  read_f64_le(in, m.params.values());
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const FlatModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, "cannot write " + path.string());
  write_checkpoint(out, m);
  if (!out) raise(ErrorKind::Io, "write failed for " + path.string());
}

FlatModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace stethofed
