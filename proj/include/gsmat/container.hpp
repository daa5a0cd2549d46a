#pragma once

// GSM1 container: an 8-byte little-endian header length, a JSON header,
// then the payload as contiguous little-endian float64 values.
//
// Header fields: format ("GSM1"), kind (dense | permutation | blockdiag |
// gs | chain | gsoft), shape, dtype ("f64le"), layout ("row-major"),
// count (payload values), plus kind-specific fields.

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gsmat/blockdiag.hpp"
#include "gsmat/chain.hpp"
#include "gsmat/error.hpp"
#include "gsmat/gs.hpp"
#include "gsmat/gsoft.hpp"
#include "gsmat/matrix.hpp"
#include "gsmat/perm.hpp"

namespace gsmat::io {

using json = nlohmann::json;

inline constexpr std::string_view kFormat = "GSM1";

struct Container {
  json header;
  std::vector<double> payload;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

template <class T>
T field(const json& h, const char* name) {
  if (!h.contains(name)) throw format_error(name, "missing");
  try {
    return h.at(name).get<T>();
  } catch (const json::exception&) {
    throw format_error(name, "has the wrong type");
  }
}

inline std::vector<std::size_t> shape(const json& h, std::size_t rank) {
  auto s = field<std::vector<std::size_t>>(h, "shape");
  if (s.size() != rank) throw format_error("shape", "expected " + std::to_string(rank) + " dimensions");
  return s;
}

inline void expect_kind(const Container& c, std::string_view kind) {
  const auto k = field<std::string>(c.header, "kind");
  if (k != kind) throw format_error("kind", "expected '" + std::string(kind) + "', found '" + k + "'");
}

class PayloadReader {
 public:
  explicit PayloadReader(const std::vector<double>& p) : p_(p) {}
  double next() {
    if (at_ >= p_.size()) throw format_error("count", "payload is shorter than the header implies");
    return p_[at_++];
  }
  Matrix matrix(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = next();
    return m;
  }
  void finish() const {
    if (at_ != p_.size()) throw format_error("count", "payload is longer than the header implies");
  }

 private:
  const std::vector<double>& p_;
  std::size_t at_ = 0;
};

inline void append(std::vector<double>& out, const Matrix& m) { out.insert(out.end(), m.data().begin(), m.data().end()); }

inline json base_header(std::string_view kind, std::vector<std::size_t> shape) {
  return json{{"format", kFormat}, {"kind", kind}, {"shape", std::move(shape)}, {"dtype", "f64le"}, {"layout", "row-major"}};
}

}  // namespace detail

inline std::string encode(const Container& c) {
  json h = c.header;
  h["count"] = c.payload.size();
  const std::string text = h.dump();
  std::string out;
  out.reserve(8 + text.size() + 8 * c.payload.size());
  detail::put_u64(out, text.size());
  out += text;
  for (double v : c.payload) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Container decode(std::string_view bytes) {
  if (bytes.size() < 8) throw format_error("header", "file is shorter than the length prefix");
  const std::uint64_t len = detail::get_u64(bytes, 0);
  if (len > bytes.size() - 8) throw format_error("header", "declared header length exceeds file size");
  Container c;
  try {
    c.header = json::parse(bytes.substr(8, len));
  } catch (const json::exception& e) {
    throw format_error("header", std::string("invalid JSON: ") + e.what());
  }
  if (!c.header.is_object()) throw format_error("header", "must be a JSON object");
  if (detail::field<std::string>(c.header, "format") != kFormat) throw format_error("format", "expected GSM1");
  if (detail::field<std::string>(c.header, "dtype") != "f64le") throw format_error("dtype", "expected f64le");
  if (detail::field<std::string>(c.header, "layout") != "row-major") throw format_error("layout", "expected row-major");
  const auto kind = detail::field<std::string>(c.header, "kind");
  static const char* kinds[] = {"dense", "permutation", "blockdiag", "gs", "chain", "gsoft"};
  if (std::find(std::begin(kinds), std::end(kinds), kind) == std::end(kinds)) throw format_error("kind", "unknown kind '" + kind + "'");
  detail::field<std::vector<std::size_t>>(c.header, "shape");
  const auto count = detail::field<std::uint64_t>(c.header, "count");
  const std::size_t body = bytes.size() - 8 - len;
  if (body != 8 * count) {
    throw format_error("count", "header declares " + std::to_string(count) + " values but payload has " +
                                    std::to_string(body) + " bytes");
  }
  c.payload.resize(count);
  for (std::size_t i = 0; i < count; ++i) c.payload[i] = std::bit_cast<double>(detail::get_u64(bytes, 8 + len + 8 * i));
  c.header.erase("count");
  return c;
}

inline void save(const std::string& path, const Container& c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  const std::string bytes = encode(c);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw io_error("failed writing '" + path + "'");
}

inline Container load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

// ---- permutations and specs as JSON ----

inline json to_json(const Permutation& p) { return json{{"n", p.size()}, {"sigma", p.sigma()}}; }

/// {"n", "sigma"} explicitly, or the shorthands {"stride": k} and
/// {"paired_stride": k}; absent or "identity" means the identity.
inline Permutation permutation_from_json(const json& j, std::size_t n, const std::string& name) {
  if (j.is_null() || (j.is_string() && j.get<std::string>() == "identity")) return Permutation::identity(n);
  if (!j.is_object()) throw format_error(name, "must be an object or \"identity\"");
  try {
    if (j.contains("sigma")) {
      Permutation p(j.at("sigma").get<std::vector<std::size_t>>());
      if (p.size() != n) throw format_error(name, "has dimension " + std::to_string(p.size()) + ", expected " + std::to_string(n));
      return p;
    }
    if (j.contains("stride")) return stride_perm(j.at("stride").get<std::size_t>(), n);
    if (j.contains("paired_stride")) return paired_stride_perm(j.at("paired_stride").get<std::size_t>(), n);
  } catch (const json::exception&) {
    throw format_error(name, "has the wrong type");
  } catch (const std::invalid_argument& e) {
    throw format_error(name, e.what());
  }
  throw format_error(name, "needs one of sigma, stride, paired_stride");
}

inline json to_json(const GSClassSpec& s) {
  return json{{"m", s.m},
              {"n", s.n},
              {"s", s.s},
              {"k_L", s.k_l},
              {"k_R", s.k_r},
              {"b_L", {s.b_l.rows, s.b_l.cols}},
              {"b_R", {s.b_r.rows, s.b_r.cols}},
              {"P_L", to_json(s.p_l)},
              {"P", to_json(s.p)},
              {"P_R", to_json(s.p_r)}};
}

inline GSClassSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw format_error("spec", "must be a JSON object");
  const auto k_l = detail::field<std::size_t>(j, "k_L");
  const auto k_r = detail::field<std::size_t>(j, "k_R");
  const auto bl = detail::field<std::vector<std::size_t>>(j, "b_L");
  const auto br = detail::field<std::vector<std::size_t>>(j, "b_R");
  if (bl.size() != 2) throw format_error("b_L", "expected [rows, cols]");
  if (br.size() != 2) throw format_error("b_R", "expected [rows, cols]");
  const std::size_t m = bl[0] * k_l, n = br[1] * k_r, s = bl[1] * k_l;
  for (auto [name, v] : {std::pair{"m", m}, std::pair{"n", n}, std::pair{"s", s}}) {
    if (j.contains(name) && detail::field<std::size_t>(j, name) != v) throw format_error(name, "inconsistent with block layout");
  }
  auto get = [&](const char* name) { return j.contains(name) ? j.at(name) : json(); };
  try {
    return make_gs_spec(k_l, {bl[0], bl[1]}, k_r, {br[0], br[1]}, permutation_from_json(get("P_L"), m, "P_L"),
                        permutation_from_json(get("P"), s, "P"), permutation_from_json(get("P_R"), n, "P_R"));
  } catch (const dimension_error& e) {
    throw format_error("spec", e.what());
  }
}

// ---- typed containers ----

inline Container to_container(const Matrix& m) {
  Container c{detail::base_header("dense", {m.rows(), m.cols()}), {}};
  detail::append(c.payload, m);
  return c;
}

inline Matrix matrix_from(const Container& c) {
  detail::expect_kind(c, "dense");
  const auto s = detail::shape(c.header, 2);
  detail::PayloadReader rd(c.payload);
  Matrix m = rd.matrix(s[0], s[1]);
  rd.finish();
  return m;
}

inline Container to_container(const Permutation& p) {
  Container c{detail::base_header("permutation", {p.size()}), {}};
  c.header["sigma"] = p.sigma();
  return c;
}

inline Permutation permutation_from(const Container& c) {
  detail::expect_kind(c, "permutation");
  const auto s = detail::shape(c.header, 1);
  try {
    Permutation p(detail::field<std::vector<std::size_t>>(c.header, "sigma"));
    if (p.size() != s[0]) throw format_error("sigma", "length differs from shape");
    return p;
  } catch (const std::invalid_argument& e) {
    throw format_error("sigma", e.what());
  }
}

inline json block_shapes(const BlockDiagonal& bd) {
  json shapes = json::array();
  for (const Matrix& b : bd.blocks()) shapes.push_back({b.rows(), b.cols()});
  return shapes;
}

inline BlockDiagonal read_blocks(const json& shapes, detail::PayloadReader& rd, const char* name) {
  std::vector<Matrix> blocks;
  try {
    for (const auto& s : shapes) {
      const auto v = s.get<std::vector<std::size_t>>();
      if (v.size() != 2) throw format_error(name, "block shape must be [rows, cols]");
      blocks.push_back(rd.matrix(v[0], v[1]));
    }
  } catch (const json::exception&) {
    throw format_error(name, "has the wrong type");
  }
  return BlockDiagonal(std::move(blocks));
}

inline Container to_container(const BlockDiagonal& bd) {
  Container c{detail::base_header("blockdiag", {bd.rows(), bd.cols()}), {}};
  c.header["blocks"] = block_shapes(bd);
  for (const Matrix& b : bd.blocks()) detail::append(c.payload, b);
  return c;
}

inline BlockDiagonal blockdiag_from(const Container& c) {
  detail::expect_kind(c, "blockdiag");
  detail::PayloadReader rd(c.payload);
  if (!c.header.contains("blocks") || !c.header["blocks"].is_array()) throw format_error("blocks", "missing");
  BlockDiagonal bd = read_blocks(c.header["blocks"], rd, "blocks");
  rd.finish();
  return bd;
}

/// Payload: L blocks then R blocks, each row-major.
inline Container to_container(const GSMatrix& a) {
  Container c{detail::base_header("gs", {a.spec().m, a.spec().n}), {}};
  c.header["spec"] = to_json(a.spec());
  for (const Matrix& b : a.left().blocks()) detail::append(c.payload, b);
  for (const Matrix& b : a.right().blocks()) detail::append(c.payload, b);
  return c;
}

inline GSMatrix gs_from(const Container& c) {
  detail::expect_kind(c, "gs");
  if (!c.header.contains("spec")) throw format_error("spec", "missing");
  const GSClassSpec spec = spec_from_json(c.header["spec"]);
  const auto s = detail::shape(c.header, 2);
  if (s[0] != spec.m || s[1] != spec.n) throw format_error("shape", "differs from spec dimensions");
  detail::PayloadReader rd(c.payload);
  std::vector<Matrix> l, r;
  for (std::size_t k = 0; k < spec.k_l; ++k) l.push_back(rd.matrix(spec.b_l.rows, spec.b_l.cols));
  for (std::size_t k = 0; k < spec.k_r; ++k) r.push_back(rd.matrix(spec.b_r.rows, spec.b_r.cols));
  rd.finish();
  return GSMatrix(spec, BlockDiagonal(std::move(l)), BlockDiagonal(std::move(r)));
}

inline Container to_container(const GSChain& ch) {
  Container c{detail::base_header("chain", {ch.output_dim(), ch.input_dim()}), {}};
  json factors = json::array();
  for (const ChainFactor& f : ch.factors()) {
    factors.push_back(json{{"blocks", block_shapes(f.blocks)}, {"perm", to_json(f.perm)}});
    for (const Matrix& b : f.blocks.blocks()) detail::append(c.payload, b);
  }
  c.header["factors"] = std::move(factors);
  c.header["out_perm"] = to_json(ch.out_perm());
  return c;
}

inline GSChain chain_from(const Container& c) {
  detail::expect_kind(c, "chain");
  if (!c.header.contains("factors") || !c.header["factors"].is_array()) throw format_error("factors", "missing");
  detail::PayloadReader rd(c.payload);
  std::vector<ChainFactor> factors;
  for (const auto& f : c.header["factors"]) {
    if (!f.is_object() || !f.contains("blocks")) throw format_error("factors", "each factor needs blocks and perm");
    BlockDiagonal bd = read_blocks(f["blocks"], rd, "factors");
    Permutation p = permutation_from_json(f.contains("perm") ? f["perm"] : json(), bd.cols(), "perm");
    factors.push_back({std::move(bd), std::move(p)});
  }
  rd.finish();
  if (factors.empty()) throw format_error("factors", "empty");
  const std::size_t out_dim = factors.back().blocks.rows();
  Permutation out = permutation_from_json(c.header.contains("out_perm") ? c.header["out_perm"] : json(), out_dim, "out_perm");
  try {
    return GSChain(std::move(factors), std::move(out));
  } catch (const dimension_error& e) {
    throw format_error("factors", e.what());
  }
}

/// FNV-1a over the little-endian bytes of the shape and entries.
inline std::string weight_hash(const Matrix& w) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  mix(w.rows());
  mix(w.cols());
  for (double v : w.data()) mix(std::bit_cast<std::uint64_t>(v));
  std::ostringstream os;
  os << "fnv1a64:" << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

/// Checkpoint of a GSOFT adapter: the frozen weight is referenced by hash,
/// generators are stored as the strict upper triangle of each K block
/// (L blocks, then R blocks), followed by the scale.
inline Container to_checkpoint(const GSOFTAdapter& a) {
  Container c{detail::base_header("gsoft", {a.w0.rows(), a.w0.cols()}), {}};
  c.header["w0_hash"] = weight_hash(a.w0);
  c.header["spec"] = to_json(a.q.spec);
  c.header["generators"] = "packed-upper";
  for (const Matrix& g : a.q.gen_l.gens) {
    const Vector p = pack_upper(g);
    c.payload.insert(c.payload.end(), p.begin(), p.end());
  }
  for (const Matrix& g : a.q.gen_r.gens) {
    const Vector p = pack_upper(g);
    c.payload.insert(c.payload.end(), p.begin(), p.end());
  }
  c.payload.push_back(a.scale);
  return c;
}

/// Restores the adapter around `w0`, which must match the recorded hash.
inline GSOFTAdapter checkpoint_from(const Container& c, Matrix w0) {
  detail::expect_kind(c, "gsoft");
  if (detail::field<std::string>(c.header, "w0_hash") != weight_hash(w0)) {
    throw format_error("w0_hash", "does not match the supplied base weight");
  }
  if (!c.header.contains("spec")) throw format_error("spec", "missing");
  const GSClassSpec spec = spec_from_json(c.header["spec"]);
  if (!spec.is_square_blocked() || spec.n != w0.rows()) throw format_error("spec", "not an orthogonal class over d = w0 rows");
  detail::PayloadReader rd(c.payload);
  auto read_gens = [&](std::size_t k, std::size_t b) {
    SkewGenerators g;
    for (std::size_t i = 0; i < k; ++i) {
      Vector packed(b * (b - 1) / 2);
      for (double& v : packed) v = rd.next();
      g.gens.push_back(unpack_upper(packed, b));
    }
    return g;
  };
  SkewGenerators gl = read_gens(spec.k_l, spec.b_l.rows);
  SkewGenerators gr = read_gens(spec.k_r, spec.b_r.rows);
  const double scale = rd.next();
  rd.finish();
  return GSOFTAdapter{std::move(w0), OrthoGSParams{spec, std::move(gl), std::move(gr)}, scale};
}

}  // namespace gsmat::io
