#pragma once

#include <vector>

#include "glora/tensor.hpp"

namespace glora {

// Cosine-similarity K-NN with an unweighted majority vote; vote ties go to
// the lowest class id, neighbor-distance ties to the lower training index.
// Embeddings are L2-normalized internally. k must not exceed the train count.
double knn_eval(const Tensor& train_emb, const std::vector<int>& train_labels, const Tensor& test_emb,
                const std::vector<int>& test_labels, int k);

// Argmax match rate; argmax ties resolve to the lowest index.
double top1_accuracy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace glora
