#include "cwms/checkpoint_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cwms/error.hpp"
#include "cwms/rng.hpp"

namespace cwms {
namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

void put_f32(std::string& out, double value) {
  put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  float get_f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::Format, std::string("truncated checkpoint: missing ") + what);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

struct Header {
  std::uint32_t dim = 0;
  std::uint32_t buckets = 0;
  StageTag stage = StageTag::Base;
  std::uint64_t seed = 0;
  ComponentKind kind = ComponentKind::Embedder;
  std::uint64_t trained_examples = 0;
  std::string reference;
};

std::string write_prefix(const Header& h) {
  std::string record;
  put_le<std::uint32_t>(record, h.dim);
  put_le<std::uint32_t>(record, h.buckets);
  put_le<std::uint8_t>(record, static_cast<std::uint8_t>(h.stage));
  put_le<std::uint64_t>(record, h.seed);
  put_le<std::uint8_t>(record, static_cast<std::uint8_t>(h.kind));
  put_le<std::uint64_t>(record, h.trained_examples);
  put_le<std::uint16_t>(record, static_cast<std::uint16_t>(h.reference.size()));
  record += h.reference;

  std::string out(kCheckpointMagic);
  put_le<std::uint8_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(record.size()));
  out += record;
  return out;
}

std::string hex_bytes(std::string_view s) {
  std::ostringstream os;
  os << "0x";
  for (unsigned char c : s) os << std::hex << std::setw(2) << std::setfill('0') << int(c);
  return os.str();
}

Header read_header(Reader& in) {
  const auto magic = in.take(kCheckpointMagic.size(), "magic");
  if (magic != kCheckpointMagic) {
    throw Error(ErrorKind::Format, "bad magic: expected \"CWMS\", found " + hex_bytes(magic));
  }
  const auto version = in.get<std::uint8_t>("version");
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::Format, "unsupported checkpoint version: expected " +
                                       std::to_string(kCheckpointVersion) + ", found " +
                                       std::to_string(version));
  }
  const auto length = in.get<std::uint32_t>("header length");
  Reader rec(in.take(length, "header record"));
  Header h;
  h.dim = rec.get<std::uint32_t>("dim");
  h.buckets = rec.get<std::uint32_t>("buckets");
  const auto stage = rec.get<std::uint8_t>("stage");
  if (stage > 3) throw Error(ErrorKind::Format, "bad stage tag " + std::to_string(stage));
  h.stage = static_cast<StageTag>(stage);
  h.seed = rec.get<std::uint64_t>("seed");
  const auto kind = rec.get<std::uint8_t>("component kind");
  if (kind > 1) throw Error(ErrorKind::Format, "bad component kind " + std::to_string(kind));
  h.kind = static_cast<ComponentKind>(kind);
  h.trained_examples = rec.get<std::uint64_t>("trained examples");
  const auto ref_len = rec.get<std::uint16_t>("reference length");
  h.reference = std::string(rec.take(ref_len, "reference"));
  if (rec.remaining() != 0) throw Error(ErrorKind::Format, "header record has trailing bytes");
  return h;
}

void expect_kind(const Header& h, ComponentKind want) {
  if (h.kind != want) {
    throw Error(ErrorKind::Format, "wrong component kind: expected " +
                                       std::string(to_string(want)) + ", found " +
                                       std::string(to_string(h.kind)));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::string serialize(const EmbedderCheckpoint& ckpt) {
  Header h{ckpt.dim(), ckpt.buckets(), ckpt.stage(), ckpt.seed(), ComponentKind::Embedder,
           ckpt.trained_examples(), {}};
  std::string out = write_prefix(h);
  out.reserve(out.size() + 4 * static_cast<std::size_t>(ckpt.dim()) * ckpt.buckets());
  for (std::uint32_t r = 0; r < ckpt.dim(); ++r) {
    for (std::uint32_t c = 0; c < ckpt.buckets(); ++c) put_f32(out, ckpt.weight(r, c));
  }
  return out;
}

std::string serialize(const RerankerCheckpoint& ckpt) {
  Header h{1, static_cast<std::uint32_t>(kCrossFeatureCount), ckpt.stage(), ckpt.seed(),
           ComponentKind::Reranker, ckpt.trained_examples(), ckpt.feature_embedder_id()};
  std::string out = write_prefix(h);
  for (double w : ckpt.weights()) put_f32(out, w);
  return out;
}

EmbedderCheckpoint deserialize_embedder(std::string_view bytes) {
  Reader in(bytes);
  const Header h = read_header(in);
  expect_kind(h, ComponentKind::Embedder);
  const std::size_t count = static_cast<std::size_t>(h.dim) * h.buckets;
  if (in.remaining() != 4 * count) {
    throw Error(ErrorKind::Format, "truncated checkpoint: payload has " +
                                       std::to_string(in.remaining()) + " bytes, expected " +
                                       std::to_string(4 * count));
  }
  EmbedderCheckpoint ckpt(h.dim, h.buckets, h.stage, h.seed);
  ckpt.set_trained_examples(h.trained_examples);
  for (std::uint32_t r = 0; r < h.dim; ++r) {
    for (std::uint32_t c = 0; c < h.buckets; ++c) {
      const float v = in.get_f32("weights");
      if (!std::isfinite(v)) throw Error(ErrorKind::Format, "non-finite weight in checkpoint");
      ckpt.weight(r, c) = v;
    }
  }
  return ckpt;
}

RerankerCheckpoint deserialize_reranker(std::string_view bytes) {
  Reader in(bytes);
  const Header h = read_header(in);
  expect_kind(h, ComponentKind::Reranker);
  if (h.dim != 1 || h.buckets != kCrossFeatureCount) {
    throw Error(ErrorKind::Format, "reranker checkpoint must be 1 x 5");
  }
  if (in.remaining() != 4 * kCrossFeatureCount) {
    throw Error(ErrorKind::Format, "truncated checkpoint: reranker payload");
  }
  RerankerCheckpoint::Weights w{};
  for (double& v : w) {
    v = in.get_f32("weights");
    if (!std::isfinite(v)) throw Error(ErrorKind::Format, "non-finite weight in checkpoint");
  }
  RerankerCheckpoint ckpt(w, h.stage, h.seed, h.reference);
  ckpt.set_trained_examples(h.trained_examples);
  return ckpt;
}

void save_checkpoint(const EmbedderCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize(ckpt));
}

void save_checkpoint(const RerankerCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize(ckpt));
}

EmbedderCheckpoint load_embedder(const std::filesystem::path& path) {
  try {
    return deserialize_embedder(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

RerankerCheckpoint load_reranker(const std::filesystem::path& path) {
  try {
    return deserialize_reranker(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

ComponentKind peek_component(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string head(512, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  Reader r(head);
  return read_header(r).kind;
}

std::string fingerprint(const EmbedderCheckpoint& ckpt) { return hex64(fnv1a64(serialize(ckpt))); }
std::string fingerprint(const RerankerCheckpoint& ckpt) { return hex64(fnv1a64(serialize(ckpt))); }

}  // namespace cwms
