#include "stethofed/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include "stethofed/checkpoint.hpp"
#include "stethofed/error.hpp"

namespace stethofed {
namespace {

constexpr std::string_view kFields = "index device label age_group sex site offset";

std::string next_line(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) raise(ErrorKind::Format, path.string() + ": unexpected end of file");
  return line;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const std::string& name, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir / (name + ".manifest");
  const auto blob_path = dir / (name + ".blob");

  std::ofstream manifest(manifest_path);
  if (!manifest) raise(ErrorKind::Io, "cannot write " + manifest_path.string());
  manifest << kDatasetFormat << '\n';
  manifest << "dims " << ds.freq_bins << ' ' << ds.time_frames << '\n';
  manifest << "classes";
  for (auto c : kClassNames) manifest << ' ' << c;
  manifest << '\n';
  for (std::size_t a = 0; a < kNumAttributes; ++a) {
    manifest << "vocab " << kAttributeNames[a];
    for (TokenId t : ds.vocab.tokens_of(static_cast<Attribute>(a))) {
      manifest << ' ' << ds.vocab.name(t);
    }
    manifest << '\n';
  }
  manifest << "blob " << blob_path.filename().string() << '\n';
  manifest << "fields " << kFields << '\n';
  manifest << "records " << ds.records.size() << '\n';

  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) raise(ErrorKind::Io, "cannot write " + blob_path.string());
  const std::size_t record_bytes = ds.freq_bins * ds.time_frames * 8;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.grid.freq_bins() != ds.freq_bins || r.grid.time_frames() != ds.time_frames) {
      raise(ErrorKind::ShapeMismatch, "record " + std::to_string(i) + " has the wrong shape");
    }
    manifest << i << ' ' << r.device << ' ' << class_name(r.label);
    for (std::size_t a = 1; a < kNumAttributes; ++a) {
      manifest << ' ' << ds.vocab.name(r.prompt.tokens[a]);
    }
    manifest << ' ' << i * record_bytes << '\n';
    write_f64_le(blob, r.grid.values());
  }
  if (!manifest || !blob) raise(ErrorKind::Io, "write failed for dataset " + name);
}

Dataset read_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) raise(ErrorKind::Io, "cannot open " + manifest_path.string());
  if (next_line(in, manifest_path) != kDatasetFormat) {
    raise(ErrorKind::Format, manifest_path.string() + ": not an RSFD-1 manifest");
  }

  Dataset ds;
  std::string blob_name;
  std::size_t count = 0;
  bool have_dims = false;
  for (;;) {
    std::istringstream line(next_line(in, manifest_path));
    std::string key;
    line >> key;
    if (key == "dims") {
      line >> ds.freq_bins >> ds.time_frames;
      have_dims = ds.freq_bins > 0 && ds.time_frames > 0;
    } else if (key == "classes") {
      for (auto expected : kClassNames) {
        std::string c;
        line >> c;
        if (c != expected) raise(ErrorKind::Format, "unexpected class vocabulary");
      }
    } else if (key == "vocab") {
      std::string attr, token;
      line >> attr;
      std::size_t a = 0;
      while (a < kNumAttributes && kAttributeNames[a] != attr) ++a;
      if (a == kNumAttributes) raise(ErrorKind::Format, "unknown attribute '" + attr + "'");
      while (line >> token) ds.vocab.add(static_cast<Attribute>(a), token);
    } else if (key == "blob") {
      line >> blob_name;
    } else if (key == "fields") {
      std::string rest;
      std::getline(line >> std::ws, rest);
      if (rest != kFields) raise(ErrorKind::Format, "unsupported record field order: " + rest);
    } else if (key == "records") {
      line >> count;
      break;
    } else {
      raise(ErrorKind::Format, "unknown manifest key '" + key + "'");
    }
  }
  if (!have_dims || blob_name.empty()) {
    raise(ErrorKind::Format, manifest_path.string() + ": missing dims or blob entry");
  }

  const auto blob_path = manifest_path.parent_path() / blob_name;
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) raise(ErrorKind::Io, "cannot open " + blob_path.string());
  const std::size_t record_bytes = ds.freq_bins * ds.time_frames * 8;
  blob.seekg(0, std::ios::end);
  const auto blob_size = static_cast<std::size_t>(blob.tellg());
  blob.seekg(0);
  if (blob_size != count * record_bytes) {
    raise(ErrorKind::Format, blob_path.string() + ": size " + std::to_string(blob_size) +
                                 " does not match " + std::to_string(count) + " records");
  }

  ds.records.reserve(count);
  std::size_t prev_offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream line(next_line(in, manifest_path));
    std::size_t index = 0, offset = 0;
    std::string device, label, age, sex, site;
    if (!(line >> index >> device >> label >> age >> sex >> site >> offset)) {
      raise(ErrorKind::Format, "malformed record line " + std::to_string(i));
    }
    if (i > 0 && offset <= prev_offset) raise(ErrorKind::Format, "record offsets must increase");
    if (offset != i * record_bytes) raise(ErrorKind::Format, "record offset out of sequence");
    prev_offset = offset;
    const auto cls = parse_class(label);
    if (!cls) raise(ErrorKind::Format, "unknown class '" + label + "'");

    Record rec;
    rec.device = device;
    rec.label = *cls;
    rec.prompt.set(Attribute::Device, ds.vocab.id(device));
    rec.prompt.set(Attribute::AgeGroup, ds.vocab.id(age));
    rec.prompt.set(Attribute::Sex, ds.vocab.id(sex));
    rec.prompt.set(Attribute::Site, ds.vocab.id(site));
    rec.grid = SpecGrid(ds.freq_bins, ds.time_frames);
    read_f64_le(blob, rec.grid.values());
    if (!rec.grid.all_finite()) {
      raise(ErrorKind::NonFinite, "record " + std::to_string(i) + " holds non-finite values");
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace stethofed
