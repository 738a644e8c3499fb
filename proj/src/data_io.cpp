#include "twdtw/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include "twdtw/random.hpp"

namespace twdtw {
namespace fs = std::filesystem;
namespace {

// Little-endian encoding independent of the host byte order.
class ByteWriter {
 public:
  template <class U>
  void put_uint(U v) {
    for (std::size_t k = 0; k < sizeof(U); ++k) {
      buf_.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * k)) & 0xff));
    }
  }
  void put_f64(double v) { put_uint(std::bit_cast<std::uint64_t>(v)); }
  void put_f32(float v) { put_uint(std::bit_cast<std::uint32_t>(v)); }
  void put_bytes(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<char>& data, std::string origin)
      : data_(data), origin_(std::move(origin)) {}

  std::size_t remaining() const { return data_.size() - pos_; }

  template <class U>
  U get_uint() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + k])) << (8 * k);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  double get_f64() { return std::bit_cast<double>(get_uint<std::uint64_t>()); }
  float get_f32() { return std::bit_cast<float>(get_uint<std::uint32_t>()); }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(data_.data() + pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw Error(ErrorCode::TruncatedPayload, origin_ + ": file is truncated");
    }
  }

  const std::vector<char>& data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, path.string() + ": cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, path.string() + ": write failed");
}

const char* split_name(Split s) { return s == Split::Train ? "train" : "val"; }

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

void put_tensor(ByteWriter& w, const Tensor3& t) {
  for (double v : t.values()) w.put_f64(v);
}

Tensor3 get_tensor(ByteReader& r, std::size_t nc, std::size_t tc, std::size_t nf) {
  Tensor3 t(nc, tc, nf);
  for (double& v : t.values()) v = r.get_f64();
  return t;
}

}  // namespace

// --- TSE files --------------------------------------------------------------

void write_tse(const fs::path& path, const Tse& t, Dtype dtype) {
  if (t.length() == 0 || t.features() == 0) {
    throw Error(ErrorCode::EmptySequence, "refusing to write an empty sequence");
  }
  ByteWriter w;
  w.put_bytes("TSE1", 4);
  w.put_uint<std::uint16_t>(kTseVersion);
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(t.length()));
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(t.features()));
  w.put_uint<std::uint8_t>(static_cast<std::uint8_t>(dtype));
  for (int k = 0; k < 5; ++k) w.put_uint<std::uint8_t>(0);
  for (double v : t.data.values()) {
    if (dtype == Dtype::Float64) {
      w.put_f64(v);
    } else {
      w.put_f32(static_cast<float>(v));
    }
  }
  spill(path, w.bytes());
}

Tse read_tse(const fs::path& path) {
  const std::vector<char> bytes = slurp(path);
  const std::string origin = path.string();
  ByteReader r(bytes, origin);
  if (bytes.size() < 4 || r.get_bytes(4) != "TSE1") {
    throw Error(ErrorCode::BadMagic, origin + ": not a TSE1 file");
  }
  TseFileHeader h;
  h.version = r.get_uint<std::uint16_t>();
  if (h.version != kTseVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                origin + ": unsupported version " + std::to_string(h.version));
  }
  h.length = r.get_uint<std::uint32_t>();
  h.features = r.get_uint<std::uint32_t>();
  const auto code = r.get_uint<std::uint8_t>();
  r.get_bytes(5);
  if (code > 1) {
    throw Error(ErrorCode::UnsupportedVersion,
                origin + ": unknown dtype code " + std::to_string(code));
  }
  h.dtype = static_cast<Dtype>(code);
  if (h.length == 0) throw Error(ErrorCode::EmptySequence, origin + ": T = 0");
  if (h.features == 0) throw Error(ErrorCode::FeatureWidthMismatch, origin + ": Nf = 0");

  const std::size_t elem = h.dtype == Dtype::Float64 ? 8 : 4;
  const std::size_t count = std::size_t{h.length} * h.features;
  if (r.remaining() < count * elem) {
    throw Error(ErrorCode::TruncatedPayload,
                origin + ": payload has " + std::to_string(r.remaining()) +
                    " bytes, header implies " + std::to_string(count * elem));
  }
  if (r.remaining() > count * elem) {
    throw Error(ErrorCode::TrailingData, origin + ": trailing bytes after payload");
  }
  std::vector<double> values(count);
  for (double& v : values) v = h.dtype == Dtype::Float64 ? r.get_f64() : r.get_f32();
  Matrix m(h.length, h.features, std::move(values));
  return validate_tse(m, h.features, path.stem().string());
}

// --- manifest ----------------------------------------------------------------

int Manifest::class_index(const std::string& name) const {
  auto it = std::find(class_names.begin(), class_names.end(), name);
  return it == class_names.end() ? -1 : static_cast<int>(it - class_names.begin());
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path.string() + ": cannot open manifest");
  Manifest man;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() == 4 && fields[0] == "sample_id") continue;
      throw Error(ErrorCode::ManifestError, where + ": missing header line");
    }
    if (fields.size() != 4) {
      throw Error(ErrorCode::ManifestError, where + ": expected 4 tab-separated fields");
    }
    ManifestRecord rec{fields[0], fields[1], fields[2], Split::Train};
    if (fields[3] == "val") {
      rec.split = Split::Val;
    } else if (fields[3] != "train") {
      throw Error(ErrorCode::ManifestError, where + ": split must be train or val");
    }
    if (rec.sample_id.empty() || rec.label.empty() || rec.relative_path.empty()) {
      throw Error(ErrorCode::ManifestError, where + ": empty field");
    }
    if (!seen.insert(rec.sample_id).second) {
      throw Error(ErrorCode::ManifestError, where + ": duplicate sample id " + rec.sample_id);
    }
    if (man.class_index(rec.label) < 0) man.class_names.push_back(rec.label);
    man.records.push_back(std::move(rec));
  }
  return man;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ostringstream out;
  out << "sample_id\tpath\tlabel\tsplit\n";
  for (const auto& r : manifest.records) {
    out << r.sample_id << '\t' << r.relative_path << '\t' << r.label << '\t'
        << split_name(r.split) << '\n';
  }
  spill(path, out.str());
}

Dataset load_dataset(const fs::path& dir) {
  const Manifest man = read_manifest(dir / kManifestName);
  Dataset data;
  data.class_names = man.class_names;

  std::vector<std::string> failures;
  ErrorCode first_code = ErrorCode::IoError;
  auto fail = [&](ErrorCode code, const std::string& msg) {
    if (failures.empty()) first_code = code;
    failures.push_back(msg);
  };

  for (const auto& rec : man.records) {
    const fs::path file = dir / rec.relative_path;
    try {
      Tse t = read_tse(file);
      if (data.n_features == 0) data.n_features = t.features();
      if (t.features() != data.n_features) {
        fail(ErrorCode::FeatureWidthMismatch,
             file.string() + ": Nf = " + std::to_string(t.features()) +
                 " but dataset width is " + std::to_string(data.n_features));
        continue;
      }
      t.id = rec.sample_id;
      t.label = man.class_index(rec.label);
      (rec.split == Split::Train ? data.train : data.val).push_back(std::move(t));
    } catch (const Error& e) {
      fail(e.code(), e.what());
    }
  }
  if (!failures.empty()) {
    std::ostringstream msg;
    msg << failures.size() << " sample file(s) failed to load:";
    for (const auto& f : failures) msg << "\n  " << f;
    throw Error(first_code, msg.str());
  }
  return data;
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  Manifest man;
  man.class_names = data.class_names;
  auto emit = [&](const std::vector<Tse>& samples, Split split) {
    for (const Tse& t : samples) {
      const std::string rel = std::string(split_name(split)) + "/" + t.id + ".tse";
      write_tse(dir / rel, t);
      const int label = t.label.value_or(-1);
      if (label < 0 || static_cast<std::size_t>(label) >= data.class_names.size()) {
        throw Error(ErrorCode::InvalidArgument, "sample '" + t.id + "' has no class name");
      }
      man.records.push_back({t.id, rel, data.class_names[label], split});
    }
  };
  emit(data.train, Split::Train);
  emit(data.val, Split::Val);
  write_manifest(dir / kManifestName, man);
}

// --- synthetic generator -----------------------------------------------------

void SynthSpec::validate() const {
  if (n_classes == 0 || n_features == 0 || centroid_len == 0 || samples_per_class == 0) {
    throw Error(ErrorCode::InvalidArgument, "synthetic counts must be >= 1");
  }
  if (min_len == 0 || min_len > max_len) {
    throw Error(ErrorCode::InvalidArgument, "length range must satisfy 1 <= min <= max");
  }
  if (2 * min_len < centroid_len) {
    throw Error(ErrorCode::InvalidArgument, "min length must be >= centroid_len / 2");
  }
  if (distractor_features >= n_features) {
    throw Error(ErrorCode::InvalidArgument, "distractor_features must be < n_features");
  }
  if (warp_strength < 0 || noise_sigma < 0 || class_separation < 0) {
    throw Error(ErrorCode::InvalidArgument, "warp, noise and separation must be >= 0");
  }
}

SynthSpec weight_sensitive_spec(std::uint64_t seed) {
  SynthSpec s;
  s.class_separation = 0.0;
  s.noise_sigma = 0.3;
  s.distractor_features = 48;
  s.distractor_sigma = 1.0;
  s.spike_amplitude = 3.0;
  s.seed = seed;
  return s;
}

Dataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::size_t T_c = spec.centroid_len;
  const std::size_t nf = spec.n_features;
  const std::size_t informative = nf - spec.distractor_features;
  const double distractor_sigma =
      spec.distractor_sigma < 0 ? spec.noise_sigma : spec.distractor_sigma;

  // Smooth templates: a shared base trajectory plus a class-specific one,
  // each feature a low-frequency sinusoid over the template's timesteps.
  Rng trng = make_rng(spec.seed, "synth.templates");
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::uniform_real_distribution<double> freq(0.3, 1.2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  auto smooth = [&](double scale) {
    Matrix m(T_c, informative);
    for (std::size_t f = 0; f < informative; ++f) {
      const double a = amp(trng) * scale;
      const double w = freq(trng);
      const double p = phase(trng);
      for (std::size_t t = 0; t < T_c; ++t) {
        m(t, f) = a * std::sin(w * static_cast<double>(t) + p);
      }
    }
    return m;
  };
  const Matrix base = smooth(1.0);
  std::vector<Matrix> templates;
  std::uniform_int_distribution<std::size_t> pick_t(0, T_c - 1);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    const Matrix own = smooth(spec.class_separation);
    Matrix tpl(T_c, nf);
    for (std::size_t t = 0; t < T_c; ++t) {
      for (std::size_t f = 0; f < informative; ++f) tpl(t, f) = base(t, f) + own(t, f);
    }
    if (spec.distractor_features > 0) {
      const std::size_t f = informative + c % spec.distractor_features;
      tpl(pick_t(trng), f) = spec.spike_amplitude;
    }
    templates.push_back(std::move(tpl));
  }

  Dataset data;
  data.n_features = nf;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    data.class_names.push_back("class" + std::to_string(c));
  }

  auto make_sample = [&](std::size_t c, Rng& rng) {
    std::uniform_int_distribution<std::size_t> len(spec.min_len, spec.max_len);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t T = len(rng);
    // Random monotone time map: positive increments, normalized so that
    // sample step 0 maps to template step 0 and the last to T_c - 1.
    std::vector<double> pos(T, 0.0);
    for (std::size_t j = 1; j < T; ++j) {
      pos[j] = pos[j - 1] + std::exp(spec.warp_strength * gauss(rng));
    }
    Matrix m(T, nf);
    for (std::size_t j = 0; j < T; ++j) {
      const double scaled =
          T == 1 ? 0.0 : pos[j] / pos[T - 1] * static_cast<double>(T_c - 1);
      const auto src = std::min(T_c - 1, static_cast<std::size_t>(std::lround(scaled)));
      for (std::size_t f = 0; f < nf; ++f) {
        const double sigma = f < informative ? spec.noise_sigma : distractor_sigma;
        const double noise = gauss(rng);
        m(j, f) = templates[c](src, f) + sigma * noise;
      }
    }
    return m;
  };

  auto fill = [&](std::vector<Tse>& out, std::size_t per_class, const char* split) {
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
      Rng rng = make_rng(spec.seed, std::string("synth.") + split, c);
      for (std::size_t k = 0; k < per_class; ++k) {
        std::ostringstream id;
        id << "c" << c << "_" << split << "_" << k;
        out.push_back(Tse{id.str(), static_cast<int>(c), make_sample(c, rng)});
      }
    }
  };
  fill(data.train, spec.samples_per_class, "train");
  fill(data.val, spec.val_per_class, "val");
  return data;
}

// --- checkpoints -------------------------------------------------------------

void save_checkpoint(const fs::path& path, const ModelState& state,
                     std::uint64_t config_hash) {
  const Tensor3& C = state.centroids.data;
  const Tensor3* tensors[] = {&C,
                              &state.log_weights.log_data,
                              &state.centroid_moments.m,
                              &state.centroid_moments.v,
                              &state.weight_moments.m,
                              &state.weight_moments.v};
  for (const Tensor3* t : tensors) {
    if (!t->same_shape(C)) {
      throw Error(ErrorCode::ShapeMismatch, "checkpoint tensors differ in shape");
    }
  }
  ByteWriter w;
  w.put_bytes("TSCK", 4);
  w.put_uint<std::uint16_t>(kCheckpointVersion);
  w.put_uint<std::uint32_t>(state.epoch);
  w.put_uint<std::uint64_t>(state.step);
  w.put_uint<std::uint64_t>(config_hash);
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(C.classes()));
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(C.steps()));
  w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(C.features()));
  for (const Tensor3* t : tensors) put_tensor(w, *t);
  spill(path, w.bytes());
}

Checkpoint load_checkpoint(const fs::path& path) {
  const std::vector<char> bytes = slurp(path);
  const std::string origin = path.string();
  ByteReader r(bytes, origin);
  if (bytes.size() < 4 || r.get_bytes(4) != "TSCK") {
    throw Error(ErrorCode::BadMagic, origin + ": not a TSCK checkpoint");
  }
  const auto version = r.get_uint<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.state.epoch = r.get_uint<std::uint32_t>();
  ck.state.step = r.get_uint<std::uint64_t>();
  ck.config_hash = r.get_uint<std::uint64_t>();
  const std::size_t nc = r.get_uint<std::uint32_t>();
  const std::size_t tc = r.get_uint<std::uint32_t>();
  const std::size_t nf = r.get_uint<std::uint32_t>();
  const std::size_t payload = 6 * nc * tc * nf * 8;
  if (r.remaining() < payload) {
    throw Error(ErrorCode::TruncatedPayload, origin + ": checkpoint payload is truncated");
  }
  if (r.remaining() > payload) {
    throw Error(ErrorCode::TrailingData, origin + ": trailing bytes after checkpoint");
  }
  ck.state.centroids.data = get_tensor(r, nc, tc, nf);
  ck.state.log_weights.log_data = get_tensor(r, nc, tc, nf);
  ck.state.centroid_moments.m = get_tensor(r, nc, tc, nf);
  ck.state.centroid_moments.v = get_tensor(r, nc, tc, nf);
  ck.state.weight_moments.m = get_tensor(r, nc, tc, nf);
  ck.state.weight_moments.v = get_tensor(r, nc, tc, nf);
  return ck;
}

ModelState load_checkpoint_for_resume(const fs::path& path, std::uint64_t expected_hash) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.config_hash != expected_hash) {
    std::ostringstream msg;
    msg << path.string() << ": checkpoint config hash " << std::hex << ck.config_hash
        << " does not match current config " << expected_hash;
    throw Error(ErrorCode::HashMismatch, msg.str());
  }
  return std::move(ck.state);
}

}  // namespace twdtw
