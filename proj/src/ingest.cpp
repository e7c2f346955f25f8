#include "recgeo/ingest.hpp"

#include "recgeo/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <string_view>

namespace recgeo {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

// Accepts "123", "-4", "u123", "item_9": an optional alphabetic/underscore
// prefix followed by a signed integer.
std::int64_t parse_id(std::string_view field, std::size_t line_no, const char* what) {
  std::size_t pos = 0;
  while (pos < field.size() &&
         (std::isalpha(static_cast<unsigned char>(field[pos])) || field[pos] == '_')) {
    ++pos;
  }
  const auto digits = field.substr(pos);
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size()) {
    throw ParseError(std::string("bad ") + what + " id '" + std::string(field) + "'", line_no);
  }
  if (value < 0) {
    throw ValidationError("line " + std::to_string(line_no) + ": negative " + what +
                          " id " + std::to_string(value));
  }
  return value;
}

double parse_timestamp(std::string_view field, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() ||
      !std::isfinite(value)) {
    throw ParseError("bad timestamp '" + std::string(field) + "'", line_no);
  }
  return value;
}

struct Event {
  double timestamp;
  std::size_t order;
  ItemId item;
};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != 8) throw FormatError("EMB1: truncated header");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace

void InteractionLog::validate() const {
  std::set<std::int64_t> users;
  for (const auto& seq : sequences) {
    if (seq.items.empty()) {
      throw ValidationError("user " + std::to_string(seq.user_id) + " has an empty sequence");
    }
    if (!users.insert(seq.user_id).second) {
      throw ValidationError("duplicate user id " + std::to_string(seq.user_id));
    }
    for (ItemId item : seq.items) {
      if (item < 0 || item >= num_items) {
        throw ValidationError("item id " + std::to_string(item) + " outside [0, " +
                              std::to_string(num_items) + ")");
      }
    }
  }
}

std::size_t InteractionLog::num_interactions() const {
  std::size_t n = 0;
  for (const auto& seq : sequences) n += seq.items.size();
  return n;
}

InteractionLog parse_interactions(std::istream& in) {
  std::map<std::int64_t, std::vector<Event>> per_user;
  std::string line;
  std::size_t line_no = 0;
  std::size_t order = 0;
  ItemId max_item = -1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split_tabs(view);
    if (fields.size() != 3) {
      throw ParseError("expected 3 tab-separated fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    const auto user = parse_id(fields[0], line_no, "user");
    const auto item = parse_id(fields[1], line_no, "item");
    const auto ts = parse_timestamp(fields[2], line_no);
    per_user[user].push_back({ts, order++, item});
    max_item = std::max(max_item, item);
  }
  if (per_user.empty()) throw ParseError("no interactions", 0);

  InteractionLog log;
  log.num_items = max_item + 1;
  log.sequences.reserve(per_user.size());
  for (auto& [user, events] : per_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    UserSequence seq;
    seq.user_id = user;
    seq.items.reserve(events.size());
    for (const auto& e : events) seq.items.push_back(e.item);
    log.sequences.push_back(std::move(seq));
  }
  return log;
}

InteractionLog load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open interactions file " + path.string());
  return parse_interactions(in);
}

void write_interactions(const InteractionLog& log, std::ostream& out) {
  for (const auto& seq : log.sequences) {
    for (std::size_t t = 0; t < seq.items.size(); ++t) {
      out << 'u' << seq.user_id << "\ti" << seq.items[t] << '\t' << t << '\n';
    }
  }
}

void save_interactions(const InteractionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_interactions(log, out);
  if (!out) throw Error("write failed for " + path.string());
}

InteractionLog filter_min_count(const InteractionLog& log, std::size_t min_count) {
  std::vector<std::size_t> item_count(static_cast<std::size_t>(log.num_items), 0);
  for (const auto& seq : log.sequences) {
    for (ItemId item : seq.items) ++item_count[static_cast<std::size_t>(item)];
  }
  InteractionLog out;
  out.num_items = log.num_items;
  for (const auto& seq : log.sequences) {
    UserSequence kept{seq.user_id, {}};
    for (ItemId item : seq.items) {
      if (item_count[static_cast<std::size_t>(item)] >= min_count) kept.items.push_back(item);
    }
    if (!kept.items.empty() && kept.items.size() >= min_count) {
      out.sequences.push_back(std::move(kept));
    }
  }
  return out;
}

EmbeddingMatrix read_embeddings(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || std::memcmp(magic.data(), kEmbeddingMagic, 4) != 0) {
    throw FormatError("EMB1: bad magic");
  }
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  constexpr auto kMaxIndex = static_cast<std::uint64_t>(std::numeric_limits<Index>::max());
  if (rows > kMaxIndex || cols > kMaxIndex || (cols != 0 && rows > kMaxIndex / 4 / cols)) {
    throw FormatError("EMB1: dimensions too large");
  }
  const std::uint64_t payload_bytes = rows * cols * 4;
  if (const auto here = in.tellg(); here != std::streampos(-1)) {
    in.seekg(0, std::ios::end);
    const auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
    in.seekg(here);
    if (remaining != payload_bytes) {
      throw FormatError("EMB1: header declares " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " floats (" + std::to_string(payload_bytes) +
                        " bytes) but payload has " + std::to_string(remaining) + " bytes");
    }
  }
  Matrix values(static_cast<Index>(rows), static_cast<Index>(cols));
  std::vector<unsigned char> buf(static_cast<std::size_t>(cols) * 4);
  for (Index r = 0; r < values.rows(); ++r) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
      throw FormatError("EMB1: truncated payload, expected " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " floats");
    }
    for (Index c = 0; c < values.cols(); ++c) {
      const auto* p = &buf[static_cast<std::size_t>(c) * 4];
      const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                                 (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
      const float f = std::bit_cast<float>(bits);
      if (!std::isfinite(f)) throw FormatError("EMB1: non-finite value");
      values(r, c) = f;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("EMB1: payload longer than " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  return EmbeddingMatrix(std::move(values));
}

void write_embeddings(const EmbeddingMatrix& matrix, std::ostream& out) {
  out.write(kEmbeddingMagic, 4);
  put_u64(out, static_cast<std::uint64_t>(matrix.rows()));
  put_u64(out, static_cast<std::uint64_t>(matrix.cols()));
  std::vector<char> buf(static_cast<std::size_t>(matrix.cols()) * 4);
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) {
      const float f = static_cast<float>(matrix(r, c));
      if (!std::isfinite(f)) throw FormatError("EMB1: value does not fit in float32");
      const auto bits = std::bit_cast<std::uint32_t>(f);
      for (int b = 0; b < 4; ++b) {
        buf[static_cast<std::size_t>(c) * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
      }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open embeddings file " + path.string());
  try {
    return read_embeddings(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_embeddings(matrix, out);
  if (!out) throw Error("write failed for " + path.string());
}

void write_embeddings_csv(const EmbeddingMatrix& matrix, std::ostream& out) {
  std::array<char, 32> buf{};
  for (Index r = 0; r < matrix.rows(); ++r) {
    for (Index c = 0; c < matrix.cols(); ++c) {
      if (c > 0) out << ',';
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), matrix(r, c));
      out.write(buf.data(), res.ptr - buf.data());
    }
    out << '\n';
  }
}

void SynthConfig::validate() const {
  if (num_items < 1 || num_users < 1) throw ValidationError("need at least one item and user");
  if (num_clusters < 1 || num_clusters > num_items) {
    throw ValidationError("num_clusters must be in [1, num_items]");
  }
  if (seq_len_min < 1 || seq_len_max < seq_len_min) {
    throw ValidationError("need 1 <= seq_len_min <= seq_len_max");
  }
  if (embed_dim < 1 || distractor_dims < 0 || distractor_dims >= embed_dim) {
    throw ValidationError("need 0 <= distractor_dims < embed_dim");
  }
  if (!(norm_scale_sigma >= 0.0) || !std::isfinite(norm_scale_sigma)) {
    throw ValidationError("norm_scale_sigma must be a finite non-negative value");
  }
  if (!(jump_prob >= 0.0 && jump_prob <= 1.0)) throw ValidationError("jump_prob outside [0, 1]");
  if (!(cluster_spread >= 0.0) || !(distractor_scale >= 0.0) || distractor_topics < 0) {
    throw ValidationError("noise parameters must be non-negative");
  }
}

SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Index semantic_dims = cfg.embed_dim - cfg.distractor_dims;
  auto random_unit = [&](Index dim) {
    Vector v(dim);
    for (Index k = 0; k < dim; ++k) v(k) = normal(rng);
    const double n = v.norm();
    return n > 0.0 ? Vector(v / n) : v;
  };

  SyntheticData data;
  data.cluster_of.resize(static_cast<std::size_t>(cfg.num_items));
  std::vector<std::vector<ItemId>> members(static_cast<std::size_t>(cfg.num_clusters));
  for (Index i = 0; i < cfg.num_items; ++i) {
    const Index c = i % cfg.num_clusters;
    data.cluster_of[static_cast<std::size_t>(i)] = c;
    members[static_cast<std::size_t>(c)].push_back(i);
  }

  std::vector<Vector> centers;
  for (Index c = 0; c < cfg.num_clusters; ++c) centers.push_back(random_unit(semantic_dims));
  std::vector<Vector> topics;
  for (Index t = 0; t < cfg.distractor_topics && cfg.distractor_dims > 0; ++t) {
    topics.push_back(random_unit(cfg.distractor_dims));
  }
  std::uniform_int_distribution<std::size_t> pick_topic(0, topics.empty() ? 0 : topics.size() - 1);

  Matrix emb(cfg.num_items, cfg.embed_dim);
  const double semantic_noise = cfg.cluster_spread / std::sqrt(static_cast<double>(semantic_dims));
  const double distractor_noise =
      cfg.distractor_dims > 0 ? 1.0 / std::sqrt(static_cast<double>(cfg.distractor_dims)) : 0.0;
  constexpr double kTopicJitter = 0.25;
  for (Index i = 0; i < cfg.num_items; ++i) {
    Vector v(cfg.embed_dim);
    const auto& center = centers[static_cast<std::size_t>(data.cluster_of[static_cast<std::size_t>(i)])];
    for (Index k = 0; k < semantic_dims; ++k) v(k) = center(k) + semantic_noise * normal(rng);
    if (cfg.distractor_dims > 0) {
      if (topics.empty()) {
        for (Index k = 0; k < cfg.distractor_dims; ++k) {
          v(semantic_dims + k) = cfg.distractor_scale * distractor_noise * normal(rng);
        }
      } else {
        const auto& topic = topics[pick_topic(rng)];
        for (Index k = 0; k < cfg.distractor_dims; ++k) {
          v(semantic_dims + k) =
              cfg.distractor_scale * (topic(k) + kTopicJitter * distractor_noise * normal(rng));
        }
      }
    }
    const double n = v.norm();
    if (n > 0.0) v /= n;
    v *= std::exp(cfg.norm_scale_sigma * normal(rng));
    emb.row(i) = v.transpose();
  }
  data.embeddings = EmbeddingMatrix(std::move(emb));

  std::uniform_int_distribution<Index> pick_len(cfg.seq_len_min, cfg.seq_len_max);
  std::uniform_int_distribution<Index> pick_cluster(0, cfg.num_clusters - 1);
  std::bernoulli_distribution jump(cfg.jump_prob);
  auto pick_member = [&](Index cluster) {
    const auto& m = members[static_cast<std::size_t>(cluster)];
    std::uniform_int_distribution<std::size_t> d(0, m.size() - 1);
    return m[d(rng)];
  };

  data.log.num_items = cfg.num_items;
  for (Index u = 0; u < cfg.num_users; ++u) {
    UserSequence seq;
    seq.user_id = u;
    const Index len = pick_len(rng);
    Index cluster = pick_cluster(rng);
    seq.items.push_back(pick_member(cluster));
    for (Index t = 1; t < len; ++t) {
      if (cfg.num_clusters > 1 && jump(rng)) {
        std::uniform_int_distribution<Index> other(0, cfg.num_clusters - 2);
        const Index next = other(rng);
        cluster = next >= cluster ? next + 1 : next;
      }
      seq.items.push_back(pick_member(cluster));
    }
    data.log.sequences.push_back(std::move(seq));
  }
  return data;
}

}  // namespace recgeo
