#include "glora/ops.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace glora {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

bool suffix_of(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

void check_elementwise(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape == b.shape) return;
    if (suffix_of(b.shape, a.shape)) return;
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) +
                         " are neither equal nor trailing-broadcastable");
}

bool taping(const Tensor& y) { return y.requires_grad && Tape::active() != nullptr; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (b.ndim() != 2) throw DimensionError("matmul: rhs must be 2-D, got " + shape_str(b.shape));
    const int k = b.dim(0);
    const int n = b.dim(1);
    if (a.ndim() < 1 || a.last_dim() != k) {
        throw DimensionError("matmul: inner extents disagree, " + shape_str(a.shape) + " x " + shape_str(b.shape));
    }
    const auto rows = static_cast<Eigen::Index>(a.rows_flat());
    Shape out = a.shape;
    out.back() = n;
    Tensor y(out);
    y.requires_grad = a.requires_grad || b.requires_grad;
    MapConst A(a.ptr(), rows, k);
    MapConst B(b.ptr(), k, n);
    MapMat(y.ptr(), rows, n).noalias() = A * B;
    if (taping(y)) {
        Tape::active()->record([a, b, y, rows, k, n]() mutable {
            if (!y.grad) return;
            MapConst dY(y.grad->data(), rows, n);
            if (a.requires_grad) {
                a.ensure_grad();
                MapMat dA(a.grad->data(), rows, k);
                dA.noalias() += dY * MapConst(b.ptr(), k, n).transpose();
            }
            if (b.requires_grad) {
                b.ensure_grad();
                MapMat dB(b.grad->data(), k, n);
                dB.noalias() += MapConst(a.ptr(), rows, k).transpose() * dY;
            }
        });
    }
    return y;
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
    if (a.ndim() < 3 || b.ndim() != a.ndim()) {
        throw DimensionError("bmm: need equal-rank >=3-D operands, got " + shape_str(a.shape) + " and " + shape_str(b.shape));
    }
    const int nd = a.ndim();
    for (int i = 0; i + 2 < nd; ++i) {
        if (a.dim(i) != b.dim(i)) {
            throw DimensionError("bmm: leading dims disagree, " + shape_str(a.shape) + " vs " + shape_str(b.shape));
        }
    }
    const int p = a.dim(nd - 2);
    const int q = a.dim(nd - 1);
    const int bq = transpose_b ? b.dim(nd - 1) : b.dim(nd - 2);
    const int r = transpose_b ? b.dim(nd - 2) : b.dim(nd - 1);
    if (q != bq) throw DimensionError("bmm: inner extents disagree, " + shape_str(a.shape) + " x " + shape_str(b.shape));
    std::size_t batches = 1;
    for (int i = 0; i + 2 < nd; ++i) batches *= static_cast<std::size_t>(a.dim(i));

    Shape out(a.shape.begin(), a.shape.end() - 2);
    out.push_back(p);
    out.push_back(r);
    Tensor y(out);
    y.requires_grad = a.requires_grad || b.requires_grad;
    const std::size_t sa = static_cast<std::size_t>(p) * q;
    const std::size_t sb = static_cast<std::size_t>(b.dim(nd - 2)) * b.dim(nd - 1);
    const std::size_t sy = static_cast<std::size_t>(p) * r;
    for (std::size_t i = 0; i < batches; ++i) {
        MapConst A(a.ptr() + i * sa, p, q);
        MapMat Y(y.ptr() + i * sy, p, r);
        if (transpose_b) {
            Y.noalias() = A * MapConst(b.ptr() + i * sb, r, q).transpose();
        } else {
            Y.noalias() = A * MapConst(b.ptr() + i * sb, q, r);
        }
    }
    if (taping(y)) {
        Tape::active()->record([a, b, y, transpose_b, batches, p, q, r, sa, sb, sy]() mutable {
            if (!y.grad) return;
            if (a.requires_grad) a.ensure_grad();
            if (b.requires_grad) b.ensure_grad();
            for (std::size_t i = 0; i < batches; ++i) {
                MapConst dY(y.grad->data() + i * sy, p, r);
                if (a.requires_grad) {
                    MapMat dA(a.grad->data() + i * sa, p, q);
                    if (transpose_b) {
                        dA.noalias() += dY * MapConst(b.ptr() + i * sb, r, q);
                    } else {
                        dA.noalias() += dY * MapConst(b.ptr() + i * sb, q, r).transpose();
                    }
                }
                if (b.requires_grad) {
                    MapConst A(a.ptr() + i * sa, p, q);
                    if (transpose_b) {
                        MapMat dB(b.grad->data() + i * sb, r, q);
                        dB.noalias() += dY.transpose() * A;
                    } else {
                        MapMat dB(b.grad->data() + i * sb, q, r);
                        dB.noalias() += A.transpose() * dY;
                    }
                }
            }
        });
    }
    return y;
}

namespace {

enum class EwKind { Add, Sub, Mul };

Tensor elementwise(EwKind kind, const char* name, const Tensor& a, const Tensor& b) {
    check_elementwise(name, a, b);
    const std::size_t n = a.numel();
    const std::size_t m = b.numel();
    Tensor y(a.shape);
    y.requires_grad = a.requires_grad || b.requires_grad;
    const double* pa = a.ptr();
    const double* pb = b.ptr();
    double* py = y.ptr();
    for (std::size_t i = 0; i < n; ++i) {
        const double bv = pb[i % m];
        switch (kind) {
            case EwKind::Add: py[i] = pa[i] + bv; break;
            case EwKind::Sub: py[i] = pa[i] - bv; break;
            case EwKind::Mul: py[i] = pa[i] * bv; break;
        }
    }
    if (taping(y)) {
        Tape::active()->record([kind, a, b, y, n, m]() mutable {
            if (!y.grad) return;
            const double* dy = y.grad->data();
            if (a.requires_grad) {
                a.ensure_grad();
                double* da = a.grad->data();
                const double* pb = b.ptr();
                for (std::size_t i = 0; i < n; ++i) {
                    switch (kind) {
                        case EwKind::Add: da[i] += dy[i]; break;
                        case EwKind::Sub: da[i] += dy[i]; break;
                        case EwKind::Mul: da[i] += dy[i] * pb[i % m]; break;
                    }
                }
            }
            if (b.requires_grad) {
                b.ensure_grad();
                double* db = b.grad->data();
                const double* pa = a.ptr();
                for (std::size_t i = 0; i < n; ++i) {
                    switch (kind) {
                        case EwKind::Add: db[i % m] += dy[i]; break;
                        case EwKind::Sub: db[i % m] -= dy[i]; break;
                        case EwKind::Mul: db[i % m] += dy[i] * pa[i]; break;
                    }
                }
            }
        });
    }
    return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(EwKind::Add, "add", a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(EwKind::Sub, "sub", a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(EwKind::Mul, "mul", a, b); }

Tensor scale(const Tensor& a, double c) {
    Tensor y(a.shape);
    y.requires_grad = a.requires_grad;
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) y.at(i) = a.at(i) * c;
    if (taping(y)) {
        Tape::active()->record([a, y, c, n]() mutable {
            if (!y.grad) return;
            a.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) (*a.grad)[i] += c * (*y.grad)[i];
        });
    }
    return y;
}

Tensor softmax_lastdim(const Tensor& a) {
    const int n = a.last_dim();
    const std::size_t rows = a.rows_flat();
    Tensor y(a.shape);
    y.requires_grad = a.requires_grad;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.ptr() + r * n;
        double* o = y.ptr() + r * n;
        double mx = x[0];
        for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
        double z = 0.0;
        for (int i = 0; i < n; ++i) {
            o[i] = std::exp(x[i] - mx);
            z += o[i];
        }
        for (int i = 0; i < n; ++i) o[i] /= z;
    }
    if (taping(y)) {
        Tape::active()->record([a, y, rows, n]() mutable {
            if (!y.grad) return;
            a.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* o = y.ptr() + r * n;
                const double* dy = y.grad->data() + r * n;
                double* dx = a.grad->data() + r * n;
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += dy[i] * o[i];
                for (int i = 0; i < n; ++i) dx[i] += o[i] * (dy[i] - dot);
            }
        });
    }
    return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const int d = x.last_dim();
    if (gamma.ndim() != 1 || gamma.dim(0) != d || beta.ndim() != 1 || beta.dim(0) != d) {
        throw DimensionError("layer_norm: affine params must be [" + std::to_string(d) + "], got " +
                             shape_str(gamma.shape) + " and " + shape_str(beta.shape));
    }
    const std::size_t rows = x.rows_flat();
    Tensor y(x.shape);
    y.requires_grad = x.requires_grad || gamma.requires_grad || beta.requires_grad;
    // Normalized rows are retained for the backward pass.
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xi = x.ptr() + r * d;
        double mean = 0.0;
        for (int i = 0; i < d; ++i) mean += xi[i];
        mean /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) {
            const double c = xi[i] - mean;
            var += c * c;
        }
        var /= d;
        const double istd = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = istd;
        double* h = xhat->data() + r * d;
        double* o = y.ptr() + r * d;
        for (int i = 0; i < d; ++i) {
            h[i] = (xi[i] - mean) * istd;
            o[i] = gamma.at(static_cast<std::size_t>(i)) * h[i] + beta.at(static_cast<std::size_t>(i));
        }
    }
    if (taping(y)) {
        Tape::active()->record([x, gamma, beta, y, xhat, inv_std, rows, d]() mutable {
            if (!y.grad) return;
            if (x.requires_grad) x.ensure_grad();
            if (gamma.requires_grad) gamma.ensure_grad();
            if (beta.requires_grad) beta.ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* dy = y.grad->data() + r * d;
                const double* h = xhat->data() + r * d;
                if (gamma.requires_grad || beta.requires_grad) {
                    for (int i = 0; i < d; ++i) {
                        if (gamma.requires_grad) (*gamma.grad)[i] += dy[i] * h[i];
                        if (beta.requires_grad) (*beta.grad)[i] += dy[i];
                    }
                }
                if (x.requires_grad) {
                    double mean_dh = 0.0;
                    double mean_dhh = 0.0;
                    for (int i = 0; i < d; ++i) {
                        const double dh = dy[i] * gamma.at(static_cast<std::size_t>(i));
                        mean_dh += dh;
                        mean_dhh += dh * h[i];
                    }
                    mean_dh /= d;
                    mean_dhh /= d;
                    double* dx = x.grad->data() + r * d;
                    const double istd = (*inv_std)[r];
                    for (int i = 0; i < d; ++i) {
                        const double dh = dy[i] * gamma.at(static_cast<std::size_t>(i));
                        dx[i] += istd * (dh - mean_dh - h[i] * mean_dhh);
                    }
                }
            }
        });
    }
    return y;
}

Tensor gelu(const Tensor& x) {
    static constexpr double kSqrt2OverPi = 0.7978845608028654;
    static constexpr double kCubic = 0.044715;
    Tensor y(x.shape);
    y.requires_grad = x.requires_grad;
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.at(i);
        const double u = kSqrt2OverPi * (v + kCubic * v * v * v);
        y.at(i) = 0.5 * v * (1.0 + std::tanh(u));
    }
    if (taping(y)) {
        Tape::active()->record([x, y, n]() mutable {
            if (!y.grad) return;
            x.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const double v = x.at(i);
                const double u = kSqrt2OverPi * (v + kCubic * v * v * v);
                const double t = std::tanh(u);
                const double sech2 = 1.0 - t * t;
                const double du = kSqrt2OverPi * (1.0 + 3.0 * kCubic * v * v);
                (*x.grad)[i] += (*y.grad)[i] * (0.5 * (1.0 + t) + 0.5 * v * sech2 * du);
            }
        });
    }
    return y;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2) throw DimensionError("cross_entropy: logits must be 2-D, got " + shape_str(logits.shape));
    const int b = logits.dim(0);
    const int c = logits.dim(1);
    if (static_cast<int>(labels.size()) != b) {
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " + std::to_string(b));
    }
    for (int i = 0; i < b; ++i) {
        if (labels[i] < 0 || labels[i] >= c) {
            throw DataError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(c) + ")");
        }
    }
    auto probs = std::make_shared<std::vector<double>>(logits.numel());
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
        const double* row = logits.ptr() + static_cast<std::size_t>(i) * c;
        double* p = probs->data() + static_cast<std::size_t>(i) * c;
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
            p[j] = std::exp(row[j] - mx);
            z += p[j];
        }
        for (int j = 0; j < c; ++j) p[j] /= z;
        loss -= std::log(p[labels[i]]);
    }
    Tensor y = Tensor::scalar(loss / b);
    y.requires_grad = logits.requires_grad;
    if (taping(y)) {
        auto lab = std::make_shared<std::vector<int>>(labels);
        Tape::active()->record([logits, y, probs, lab, b, c]() mutable {
            if (!y.grad) return;
            logits.ensure_grad();
            const double g0 = (*y.grad)[0];
            for (int i = 0; i < b; ++i) {
                const double* p = probs->data() + static_cast<std::size_t>(i) * c;
                double* dl = logits.grad->data() + static_cast<std::size_t>(i) * c;
                for (int j = 0; j < c; ++j) {
                    const double onehot = (j == (*lab)[i]) ? 1.0 : 0.0;
                    dl[j] += g0 * (p[j] - onehot) / b;
                }
            }
        });
    }
    return y;
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) s += a.at(i);
    Tensor y = Tensor::scalar(s);
    y.requires_grad = a.requires_grad;
    if (taping(y)) {
        Tape::active()->record([a, y, n]() mutable {
            if (!y.grad) return;
            a.ensure_grad();
            const double g0 = (*y.grad)[0];
            for (std::size_t i = 0; i < n; ++i) (*a.grad)[i] += g0;
        });
    }
    return y;
}

Tensor reshape(const Tensor& a, Shape s) {
    if (shape_numel(s) != a.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(a.shape) + " as " + shape_str(s));
    }
    Tensor y;
    y.shape = std::move(s);
    y.data = std::make_shared<std::vector<double>>(*a.data);
    y.grad = std::make_shared<std::vector<double>>(y.data->size(), 0.0);
    y.requires_grad = a.requires_grad;
    if (taping(y)) {
        const std::size_t n = a.numel();
        Tape::active()->record([a, y, n]() mutable {
            if (!y.grad) return;
            a.ensure_grad();
            for (std::size_t i = 0; i < n; ++i) (*a.grad)[i] += (*y.grad)[i];
        });
    }
    return y;
}

Tensor permute_0213(const Tensor& a) {
    if (a.ndim() != 4) throw DimensionError("permute_0213: need 4-D, got " + shape_str(a.shape));
    const int d0 = a.dim(0), d1 = a.dim(1), d2 = a.dim(2), d3 = a.dim(3);
    Tensor y(Shape{d0, d2, d1, d3});
    y.requires_grad = a.requires_grad;
    auto src_index = [d1, d2, d3](int i, int j, int k, int l) {
        return ((static_cast<std::size_t>(i) * d1 + j) * d2 + k) * d3 + l;
    };
    auto dst_index = [d1, d2, d3](int i, int k, int j, int l) {
        return ((static_cast<std::size_t>(i) * d2 + k) * d1 + j) * d3 + l;
    };
    for (int i = 0; i < d0; ++i)
        for (int j = 0; j < d1; ++j)
            for (int k = 0; k < d2; ++k)
                for (int l = 0; l < d3; ++l) y.at(dst_index(i, k, j, l)) = a.at(src_index(i, j, k, l));
    if (taping(y)) {
        Tape::active()->record([a, y, d0, d1, d2, d3, src_index, dst_index]() mutable {
            if (!y.grad) return;
            a.ensure_grad();
            for (int i = 0; i < d0; ++i)
                for (int j = 0; j < d1; ++j)
                    for (int k = 0; k < d2; ++k)
                        for (int l = 0; l < d3; ++l)
                            (*a.grad)[src_index(i, j, k, l)] += (*y.grad)[dst_index(i, k, j, l)];
        });
    }
    return y;
}

Tensor prepend_token(const Tensor& tok, const Tensor& x) {
    if (x.ndim() != 3 || tok.ndim() != 1 || tok.dim(0) != x.dim(2)) {
        throw DimensionError("prepend_token: want token [d] and input [b,t,d], got " + shape_str(tok.shape) + " and " +
                             shape_str(x.shape));
    }
    const int b = x.dim(0), t = x.dim(1), d = x.dim(2);
    Tensor y(Shape{b, t + 1, d});
    y.requires_grad = tok.requires_grad || x.requires_grad;
    for (int i = 0; i < b; ++i) {
        double* row = y.ptr() + static_cast<std::size_t>(i) * (t + 1) * d;
        for (int l = 0; l < d; ++l) row[l] = tok.at(static_cast<std::size_t>(l));
        const double* src = x.ptr() + static_cast<std::size_t>(i) * t * d;
        std::copy(src, src + static_cast<std::size_t>(t) * d, row + d);
    }
    if (taping(y)) {
        Tape::active()->record([tok, x, y, b, t, d]() mutable {
            if (!y.grad) return;
            if (tok.requires_grad) tok.ensure_grad();
            if (x.requires_grad) x.ensure_grad();
            for (int i = 0; i < b; ++i) {
                const double* dy = y.grad->data() + static_cast<std::size_t>(i) * (t + 1) * d;
                if (tok.requires_grad)
                    for (int l = 0; l < d; ++l) (*tok.grad)[l] += dy[l];
                if (x.requires_grad) {
                    double* dx = x.grad->data() + static_cast<std::size_t>(i) * t * d;
                    for (std::size_t j = 0; j < static_cast<std::size_t>(t) * d; ++j) dx[j] += dy[d + j];
                }
            }
        });
    }
    return y;
}

Tensor take_token(const Tensor& x, int index) {
    if (x.ndim() != 3) throw DimensionError("take_token: need [b,t,d], got " + shape_str(x.shape));
    const int b = x.dim(0), t = x.dim(1), d = x.dim(2);
    if (index < 0 || index >= t) throw DimensionError("take_token: index " + std::to_string(index) + " outside [0," + std::to_string(t) + ")");
    Tensor y(Shape{b, d});
    y.requires_grad = x.requires_grad;
    for (int i = 0; i < b; ++i) {
        const double* src = x.ptr() + (static_cast<std::size_t>(i) * t + index) * d;
        std::copy(src, src + d, y.ptr() + static_cast<std::size_t>(i) * d);
    }
    if (taping(y)) {
        Tape::active()->record([x, y, index, b, t, d]() mutable {
            if (!y.grad) return;
            x.ensure_grad();
            for (int i = 0; i < b; ++i) {
                double* dx = x.grad->data() + (static_cast<std::size_t>(i) * t + index) * d;
                const double* dy = y.grad->data() + static_cast<std::size_t>(i) * d;
                for (int l = 0; l < d; ++l) dx[l] += dy[l];
            }
        });
    }
    return y;
}

Tensor col_normalize(const Tensor& w, double eps) {
    if (w.ndim() != 2) throw DimensionError("col_normalize: need 2-D, got " + shape_str(w.shape));
    const int m = w.dim(0), n = w.dim(1);
    Tensor y(w.shape);
    y.requires_grad = w.requires_grad;
    auto denom = std::make_shared<std::vector<double>>(n);
    auto norm = std::make_shared<std::vector<double>>(n);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            const double v = w.at(static_cast<std::size_t>(i) * n + j);
            s += v * v;
        }
        const double nj = std::sqrt(s);
        (*norm)[j] = nj;
        // eps guards (near-)zero columns only; healthy columns divide by the
        // exact norm so magnitude * direction reproduces w bit-for-bit.
        (*denom)[j] = nj < eps ? nj + eps : nj;
        for (int i = 0; i < m; ++i) {
            y.at(static_cast<std::size_t>(i) * n + j) = w.at(static_cast<std::size_t>(i) * n + j) / (*denom)[j];
        }
    }
    if (taping(y)) {
        Tape::active()->record([w, y, denom, norm, m, n]() mutable {
            if (!y.grad) return;
            w.ensure_grad();
            for (int j = 0; j < n; ++j) {
                const double dj = (*denom)[j];
                const double nj = (*norm)[j];
                double dot = 0.0;
                for (int i = 0; i < m; ++i) {
                    dot += (*y.grad)[static_cast<std::size_t>(i) * n + j] * w.at(static_cast<std::size_t>(i) * n + j);
                }
                for (int i = 0; i < m; ++i) {
                    const std::size_t idx = static_cast<std::size_t>(i) * n + j;
                    double g = (*y.grad)[idx] / dj;
                    if (nj > 0.0) g -= w.at(idx) * dot / (dj * dj * nj);
                    (*w.grad)[idx] += g;
                }
            }
        });
    }
    return y;
}

}  // namespace glora
