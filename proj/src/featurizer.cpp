#include "planlens/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "planlens/common.hpp"
#include "planlens/csv.hpp"

namespace planlens::featurizer {

std::size_t Vocabulary::find(const std::string& term) const {
  auto it = index.find(term);
  return it == index.end() ? terms.size() : it->second;
}

// ---- SparseMatrix -----------------------------------------------------------

SparseMatrix::SparseMatrix(std::size_t n_rows, std::size_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(n_rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                         std::vector<Triplet> entries) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(n_rows, n_cols);
  m.col_idx_.reserve(entries.size());
  m.values_.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Triplet& t = entries[k];
    if (t.row >= n_rows || t.col >= n_cols) {
      throw InternalError("sparse entry out of range");
    }
    if (k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
      throw InternalError("duplicate sparse entry (" + std::to_string(t.row) + ", " +
                          std::to_string(t.col) + ")");
    }
    if (!std::isfinite(t.value) || t.value < 0) {
      throw InternalError("sparse entries must be finite and nonnegative");
    }
    if (t.value == 0.0) continue;
    m.col_idx_.push_back(t.col);
    m.values_.push_back(t.value);
    ++m.row_ptr_[t.row + 1];
  }
  for (std::size_t r = 0; r < n_rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::from_dense(const std::vector<std::vector<double>>& rows) {
  const std::size_t n_cols = rows.empty() ? 0 : rows.front().size();
  std::vector<Triplet> entries;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != n_cols) throw InternalError("ragged dense matrix");
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (rows[i][j] != 0.0) entries.push_back({i, j, rows[i][j]});
    }
  }
  SparseMatrix m = from_triplets(rows.size(), n_cols, std::move(entries));
  for (std::size_t i = 0; i < rows.size(); ++i) m.row_ids.push_back(std::to_string(i));
  return m;
}

double SparseMatrix::at(std::size_t row, std::size_t col) const {
  const auto cols = row_cols(row);
  auto it = std::lower_bound(cols.begin(), cols.end(), col);
  if (it == cols.end() || *it != col) return 0.0;
  return row_values(row)[static_cast<std::size_t>(it - cols.begin())];
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < n_rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out.push_back({r, col_idx_[k], values_[k]});
    }
  }
  return out;
}

std::vector<std::vector<double>> SparseMatrix::to_dense() const {
  std::vector<std::vector<double>> dense(n_rows_, std::vector<double>(n_cols_, 0.0));
  for (const Triplet& t : triplets()) dense[t.row][t.col] = t.value;
  return dense;
}

SparseMatrix SparseMatrix::select_rows(std::span<const std::size_t> rows) const {
  SparseMatrix out(rows.size(), n_cols_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= n_rows_) throw InternalError("select_rows: row out of range");
    out.col_idx_.insert(out.col_idx_.end(), col_idx_.begin() + row_ptr_[r],
                        col_idx_.begin() + row_ptr_[r + 1]);
    out.values_.insert(out.values_.end(), values_.begin() + row_ptr_[r],
                       values_.begin() + row_ptr_[r + 1]);
    out.row_ptr_[i + 1] = out.values_.size();
    if (!row_ids.empty()) out.row_ids.push_back(row_ids[r]);
  }
  return out;
}

// ---- modes ------------------------------------------------------------------

std::string to_string(TfidfMode mode) {
  return mode == TfidfMode::paper ? "paper" : "classic";
}

TfidfMode parse_tfidf_mode(const std::string& s) {
  if (s == "paper") return TfidfMode::paper;
  if (s == "classic") return TfidfMode::classic;
  throw InputError("unknown tf-idf mode: " + s + " (expected paper or classic)");
}

std::string to_string(FrequencyBasis basis) {
  return basis == FrequencyBasis::corpus_count ? "corpus_count" : "doc_count";
}

FrequencyBasis parse_frequency_basis(const std::string& s) {
  if (s == "corpus_count") return FrequencyBasis::corpus_count;
  if (s == "doc_count") return FrequencyBasis::doc_count;
  throw InputError("unknown frequency basis: " + s +
                   " (expected corpus_count or doc_count)");
}

// ---- vocabulary / counts / tf-idf -------------------------------------------

std::size_t min_doc_count(double min_df, std::size_t n_docs) {
  // The epsilon absorbs representation error in products like 0.1 * 30.
  const double threshold = min_df * static_cast<double>(n_docs);
  return static_cast<std::size_t>(std::ceil(threshold - 1e-9));
}

Vocabulary build_vocabulary(const corpus::Corpus& corpus, double min_df) {
  if (corpus.size() == 0) throw InputError("cannot build a vocabulary from an empty corpus");
  if (!(min_df > 0.0 && min_df <= 1.0)) {
    throw InputError("min_df must lie in (0, 1], got " + format_number(min_df));
  }
  struct Freq {
    std::size_t docs = 0;
    std::size_t total = 0;
  };
  std::map<std::string, Freq> freq;
  for (const auto& [city, terms] : corpus.term_sequences) {
    std::unordered_set<std::string_view> seen;
    for (const auto& t : terms) {
      Freq& f = freq[t];
      ++f.total;
      if (seen.insert(t).second) ++f.docs;
    }
  }
  Vocabulary vocab;
  vocab.n_docs = corpus.size();
  vocab.min_df = min_df;
  const std::size_t needed = min_doc_count(min_df, vocab.n_docs);
  for (const auto& [term, f] : freq) {
    if (f.docs < needed) continue;
    vocab.index.emplace(term, vocab.terms.size());
    vocab.terms.push_back(term);
    vocab.doc_freq.push_back(f.docs);
    vocab.corpus_freq.push_back(f.total);
  }
  if (vocab.terms.empty()) {
    throw InputError("vocabulary is empty after document-frequency filtering (min_df = " +
                     format_number(min_df) + "); try a lower min_df");
  }
  return vocab;
}

SparseMatrix count_matrix(const corpus::Corpus& corpus, const Vocabulary& vocab) {
  std::vector<Triplet> entries;
  std::vector<std::string> ids;
  std::size_t row = 0;
  for (const auto& rec : corpus.records) {
    std::map<std::size_t, double> counts;
    for (const auto& t : corpus.terms(rec.city_id)) {
      const std::size_t j = vocab.find(t);
      if (j < vocab.size()) counts[j] += 1.0;
    }
    for (const auto& [j, c] : counts) entries.push_back({row, j, c});
    ids.push_back(rec.city_id);
    ++row;
  }
  SparseMatrix m = SparseMatrix::from_triplets(row, vocab.size(), std::move(entries));
  m.row_ids = std::move(ids);
  return m;
}

SparseMatrix tfidf_transform(const SparseMatrix& counts, const Vocabulary& vocab,
                             TfidfMode mode, FrequencyBasis basis) {
  if (counts.n_cols() != vocab.size()) {
    throw InternalError("tfidf_transform: matrix has " + std::to_string(counts.n_cols()) +
                        " columns, vocabulary has " + std::to_string(vocab.size()));
  }
  std::vector<Triplet> entries = counts.triplets();
  for (Triplet& t : entries) {
    const std::size_t divisor =
        mode == TfidfMode::classic || basis == FrequencyBasis::doc_count
            ? vocab.doc_freq[t.col]
            : vocab.corpus_freq[t.col];
    if (divisor == 0) {
      throw InternalError("term '" + vocab.terms[t.col] +
                          "' has zero corpus frequency but nonzero counts");
    }
    if (mode == TfidfMode::paper) {
      t.value /= static_cast<double>(divisor);
    } else {
      t.value *= std::log(static_cast<double>(vocab.n_docs) / static_cast<double>(divisor));
    }
  }
  SparseMatrix out =
      SparseMatrix::from_triplets(counts.n_rows(), counts.n_cols(), std::move(entries));
  out.row_ids = counts.row_ids;
  return out;
}

// ---- persistence ------------------------------------------------------------

std::string vocabulary_csv(const Vocabulary& vocab) {
  std::string out = "term,doc_freq,corpus_freq\n";
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    out += csv::join({vocab.terms[j], std::to_string(vocab.doc_freq[j]),
                      std::to_string(vocab.corpus_freq[j])});
  }
  return out;
}

std::string matrix_csv(const SparseMatrix& m, const Vocabulary& vocab) {
  std::string out = "city_id,term,value\n";
  for (const Triplet& t : m.triplets()) {
    out += csv::join({m.row_ids.at(t.row), vocab.terms.at(t.col), format_number(t.value)});
  }
  return out;
}

nlohmann::json matrix_header(const SparseMatrix& m, TfidfMode mode, double min_df) {
  return {{"n_rows", m.n_rows()},
          {"n_cols", m.n_cols()},
          {"mode", to_string(mode)},
          {"min_df", min_df}};
}

}  // namespace planlens::featurizer
