#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sotead/error.hpp"
#include "sotead/io.hpp"
#include "sotead/kg.hpp"
#include "sotead/matrix.hpp"

namespace sotead {

// Pretrained word vectors; every vector has length `dim`.
struct WordEmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  const std::vector<double>* find(const std::string& token) const {
    auto it = vectors.find(token);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

// GloVe text format: `token v1 ... vd`. A leading word2vec-style `count dim`
// header line is tolerated.
inline WordEmbeddingTable load_word_vectors(const std::filesystem::path& path) {
  WordEmbeddingTable table;
  auto lines = io::read_lines(path);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& line = lines[li];
    auto fields = io::split_ws(line.text);
    if (li == 0 && fields.size() == 2) {
      std::size_t a = 0, b = 0;
      if (io::parse_int(fields[0], a) && io::parse_int(fields[1], b)) continue;
    }
    if (fields.size() < 2)
      throw ParseError(path.string(), line.number, "expected a token followed by values");
    const std::size_t d = fields.size() - 1;
    if (table.dim == 0) table.dim = d;
    if (d != table.dim)
      throw ParseError(path.string(), line.number,
                       "vector length " + std::to_string(d) + " differs from " +
                           std::to_string(table.dim));
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k)
      if (!io::parse_double(fields[k + 1], v[k]))
        throw ParseError(path.string(), line.number, "bad number '" + std::string(fields[k + 1]) + "'");
    std::string token(fields[0]);
    if (!table.vectors.emplace(token, std::move(v)).second)
      throw DuplicateError(token, "duplicate token in '" + path.string() + "'");
  }
  if (table.dim == 0) throw ParseError(path.string(), 0, "no word vectors");
  return table;
}

struct TokenizerOptions {
  bool split_underscore = true;
};

// Lowercases ASCII letters and splits on whitespace and ASCII punctuation.
// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
inline std::vector<std::string> tokenize(std::string_view name, TokenizerOptions opt = {}) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    const auto c = static_cast<unsigned char>(name[i]);
    // U+00A0 no-break space and U+3000 ideographic space.
    if (c == 0xC2 && i + 1 < name.size() && static_cast<unsigned char>(name[i + 1]) == 0xA0) {
      flush();
      ++i;
      continue;
    }
    if (c == 0xE3 && i + 2 < name.size() && static_cast<unsigned char>(name[i + 1]) == 0x80 &&
        static_cast<unsigned char>(name[i + 2]) == 0x80) {
      flush();
      i += 2;
      continue;
    }
    if (c < 0x80) {
      if (std::isspace(c) || (std::ispunct(c) && (c != '_' || opt.split_underscore))) {
        flush();
        continue;
      }
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

// One row per entity. `oov` lists entities none of whose tokens were found;
// their rows are zero.
struct NameEmbeddings {
  Matrix vectors;
  std::vector<EntityId> oov;

  std::size_t dim() const { return vectors.cols(); }
};

inline NameEmbeddings embed_names(const KnowledgeGraph& kg, const WordEmbeddingTable& table,
                                  TokenizerOptions opt = {}) {
  if (table.dim == 0) throw ShapeError("word embedding table has dimension 0");
  NameEmbeddings out{Matrix(kg.size(), table.dim), {}};
  for (const auto& e : kg.entities()) {
    auto row = out.vectors.row(static_cast<std::size_t>(e.id));
    std::size_t found = 0;
    for (const auto& tok : tokenize(e.name, opt)) {
      const auto* v = table.find(tok);
      if (!v) continue;
      for (std::size_t k = 0; k < table.dim; ++k) row[k] += (*v)[k];
      ++found;
    }
    if (found == 0) {
      out.oov.push_back(e.id);
      continue;
    }
    for (auto& x : row) x /= static_cast<double>(found);
  }
  return out;
}

// `key<TAB>v1 v2 ... vd`, one line per entity in id order.
inline void write_embedding_rows(const std::filesystem::path& path, const KnowledgeGraph& kg,
                                 const Matrix& m) {
  auto out = io::open_out(path);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << kg.entity(static_cast<EntityId>(r)).key << '\t';
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ' ';
      out << io::format_double(m(r, c));
    }
    out << '\n';
  }
}

inline Matrix read_embedding_rows(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  auto lines = io::read_lines(path);
  if (lines.size() != kg.size())
    throw ShapeError("'" + path.string() + "' has " + std::to_string(lines.size()) +
                     " rows, expected " + std::to_string(kg.size()));
  Matrix m;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    auto cols = io::split(lines[r].text, '\t');
    if (cols.size() != 2) throw ParseError(path.string(), lines[r].number, "expected key<TAB>values");
    const EntityId id = kg.id_of(std::string(cols[0]));
    if (id != static_cast<EntityId>(r))
      throw ParseError(path.string(), lines[r].number, "rows must follow entity id order");
    auto vals = io::split_ws(cols[1]);
    if (r == 0) m = Matrix(lines.size(), vals.size());
    if (vals.size() != m.cols()) throw ParseError(path.string(), lines[r].number, "ragged row");
    for (std::size_t c = 0; c < vals.size(); ++c)
      if (!io::parse_double(vals[c], m(r, c)))
        throw ParseError(path.string(), lines[r].number, "bad number");
  }
  return m;
}

inline void write_oov_report(const std::filesystem::path& path, const KnowledgeGraph& kg,
                             const std::vector<EntityId>& oov) {
  auto out = io::open_out(path);
  for (auto id : oov) out << kg.entity(id).key << "\toov\n";
}

// Dense cosine similarities, rows index the first KG.
using SimilarityMatrix = Matrix;

inline SimilarityMatrix similarity_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("similarity_matrix: dimension " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()));
  auto norms = [](const Matrix& m) {
    std::vector<double> n(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      n[r] = std::sqrt(std::inner_product(row.begin(), row.end(), row.begin(), 0.0));
    }
    return n;
  };
  const auto na = norms(a), nb = norms(b);
  SimilarityMatrix s(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (na[i] == 0.0) continue;
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      if (nb[j] == 0.0) continue;
      auto bj = b.row(j);
      const double dot = std::inner_product(ai.begin(), ai.end(), bj.begin(), 0.0);
      s(i, j) = std::clamp(dot / (na[i] * nb[j]), -1.0, 1.0);
    }
  }
  return s;
}

inline SimilarityMatrix similarity_matrix(const NameEmbeddings& a, const NameEmbeddings& b) {
  return similarity_matrix(a.vectors, b.vectors);
}

struct PseudoPairSet {
  std::vector<EntityPair> pairs;  // sorted by source id
  double threshold = 0.99;
};

// Keeps (i, j) when s_ij is the only entry above `epsilon` in both row i and column j.
inline PseudoPairSet extract_pseudo_pairs(const SimilarityMatrix& s, double epsilon = 0.99) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("pseudo-pair threshold must lie in (0, 1)");
  std::vector<int> row_count(s.rows(), 0), col_count(s.cols(), 0);
  std::vector<std::ptrdiff_t> row_hit(s.rows(), -1);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j)
      if (s(i, j) > epsilon) {
        ++row_count[i];
        ++col_count[j];
        row_hit[i] = static_cast<std::ptrdiff_t>(j);
      }
  PseudoPairSet p{{}, epsilon};
  for (std::size_t i = 0; i < s.rows(); ++i)
    if (row_count[i] == 1 && col_count[static_cast<std::size_t>(row_hit[i])] == 1)
      p.pairs.emplace_back(static_cast<EntityId>(i), static_cast<EntityId>(row_hit[i]));
  return p;
}

// The `n` most similar columns of every row, ties to the smaller column.
inline std::vector<EntityPair> top_n_candidates(const SimilarityMatrix& s, std::size_t n) {
  if (n == 0) throw ConfigError("top-N requires N >= 1");
  const std::size_t take = std::min(n, s.cols());
  std::vector<EntityPair> q;
  q.reserve(s.rows() * take);
  std::vector<std::size_t> idx(s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    std::iota(idx.begin(), idx.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
      return s(i, a) > s(i, b) || (s(i, a) == s(i, b) && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);
    for (std::size_t k = 0; k < take; ++k)
      q.emplace_back(static_cast<EntityId>(i), static_cast<EntityId>(idx[k]));
  }
  return q;
}

}  // namespace sotead
