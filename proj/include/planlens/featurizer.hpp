#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "planlens/corpus.hpp"

namespace planlens::featurizer {

struct Vocabulary {
  std::vector<std::string> terms;  // sorted
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::size_t> doc_freq;
  std::vector<std::size_t> corpus_freq;
  std::size_t n_docs = 0;
  double min_df = 0.10;

  std::size_t size() const { return terms.size(); }
  /// Column of `term`, or size() when absent.
  std::size_t find(const std::string& term) const;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix with named rows.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n_rows, std::size_t n_cols);

  /// Entries may come in any order; duplicate (row, col) pairs are rejected,
  /// as are negative or non-finite values.
  static SparseMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                    std::vector<Triplet> entries);
  static SparseMatrix from_dense(const std::vector<std::vector<double>>& rows);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> row_cols(std::size_t row) const {
    return {col_idx_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
  }
  std::span<const double> row_values(std::size_t row) const {
    return {values_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
  }
  double at(std::size_t row, std::size_t col) const;

  std::vector<Triplet> triplets() const;
  std::vector<std::vector<double>> to_dense() const;
  SparseMatrix select_rows(std::span<const std::size_t> rows) const;

  std::vector<std::string> row_ids;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

enum class TfidfMode { paper, classic };
/// Divisor used by paper mode: total occurrences or document count.
enum class FrequencyBasis { corpus_count, doc_count };

std::string to_string(TfidfMode mode);
TfidfMode parse_tfidf_mode(const std::string& s);
std::string to_string(FrequencyBasis basis);
FrequencyBasis parse_frequency_basis(const std::string& s);

/// Smallest document count a term needs: ceil(min_df * n_docs).
std::size_t min_doc_count(double min_df, std::size_t n_docs);

Vocabulary build_vocabulary(const corpus::Corpus& corpus, double min_df = 0.10);
SparseMatrix count_matrix(const corpus::Corpus& corpus, const Vocabulary& vocab);
SparseMatrix tfidf_transform(const SparseMatrix& counts, const Vocabulary& vocab,
                             TfidfMode mode = TfidfMode::paper,
                             FrequencyBasis basis = FrequencyBasis::corpus_count);

std::string vocabulary_csv(const Vocabulary& vocab);
/// Rows `city_id,term,value` in row-major order.
std::string matrix_csv(const SparseMatrix& m, const Vocabulary& vocab);
nlohmann::json matrix_header(const SparseMatrix& m, TfidfMode mode, double min_df);

}  // namespace planlens::featurizer
