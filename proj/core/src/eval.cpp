#include "glora/eval.hpp"

#include <algorithm>
#include <cmath>

namespace glora {

namespace {

std::vector<double> l2_normalized_rows(const Tensor& emb) {
    const int d = emb.last_dim();
    const std::size_t rows = emb.rows_flat();
    std::vector<double> out(emb.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = emb.ptr() + r * d;
        double n2 = 0.0;
        for (int j = 0; j < d; ++j) n2 += src[j] * src[j];
        const double inv = n2 > 0.0 ? 1.0 / std::sqrt(n2) : 0.0;
        for (int j = 0; j < d; ++j) out[r * d + j] = src[j] * inv;
    }
    return out;
}

}  // namespace

double knn_eval(const Tensor& train_emb, const std::vector<int>& train_labels, const Tensor& test_emb,
                const std::vector<int>& test_labels, int k) {
    if (train_emb.ndim() != 2 || test_emb.ndim() != 2 || train_emb.dim(1) != test_emb.dim(1)) {
        throw DimensionError("knn_eval: want 2-D embeddings with equal width, got " + shape_str(train_emb.shape) +
                             " and " + shape_str(test_emb.shape));
    }
    const int n = train_emb.dim(0);
    const int m = test_emb.dim(0);
    const int d = train_emb.dim(1);
    if (static_cast<std::size_t>(n) != train_labels.size() || static_cast<std::size_t>(m) != test_labels.size()) {
        throw ContractError("knn_eval: label counts do not match embeddings");
    }
    if (k < 1 || k > n) {
        throw ContractError("knn_eval: k " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    int num_classes = 1;
    for (int l : train_labels) num_classes = std::max(num_classes, l + 1);

    const std::vector<double> tr = l2_normalized_rows(train_emb);
    const std::vector<double> te = l2_normalized_rows(test_emb);

    std::size_t correct = 0;
    std::vector<std::pair<double, int>> sims(static_cast<std::size_t>(n));
    std::vector<int> votes(static_cast<std::size_t>(num_classes));
    for (int i = 0; i < m; ++i) {
        const double* q = te.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < n; ++j) {
            const double* t = tr.data() + static_cast<std::size_t>(j) * d;
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += q[c] * t[c];
            sims[static_cast<std::size_t>(j)] = {s, j};
        }
        std::partial_sort(sims.begin(), sims.begin() + k, sims.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        std::fill(votes.begin(), votes.end(), 0);
        for (int j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(sims[j].second)])];
        int best = 0;
        for (int c = 1; c < num_classes; ++c) {
            if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
        }
        if (best == test_labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / m;
}

double top1_accuracy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw DimensionError("top1_accuracy: logits must be 2-D, got " + shape_str(logits.shape));
    const int b = logits.dim(0);
    const int c = logits.dim(1);
    if (static_cast<std::size_t>(b) != labels.size()) {
        throw ContractError("top1_accuracy: label count does not match logits");
    }
    std::size_t correct = 0;
    for (int i = 0; i < b; ++i) {
        const double* row = logits.ptr() + static_cast<std::size_t>(i) * c;
        int best = 0;
        for (int j = 1; j < c; ++j) {
            if (row[j] > row[best]) best = j;
        }
        if (best == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return b == 0 ? 0.0 : static_cast<double>(correct) / b;
}

}  // namespace glora
