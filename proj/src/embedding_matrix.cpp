#include "recgeo/embedding_matrix.hpp"

#include "recgeo/error.hpp"

#include <utility>

namespace recgeo {

EmbeddingMatrix::EmbeddingMatrix(Index rows, Index cols)
    : values_(Matrix::Zero(rows, cols)) {}

EmbeddingMatrix::EmbeddingMatrix(Matrix values) : values_(std::move(values)) {
  if (!values_.allFinite()) {
    throw ValidationError("embedding matrix contains non-finite values");
  }
}

Vector EmbeddingMatrix::row_norms() const { return values_.rowwise().norm(); }

}  // namespace recgeo
