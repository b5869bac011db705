#pragma once

#include <vector>

// Dense-matrix reference for a single categorical slot, written against plain
// nested vectors: explicit transition products and posterior by enumeration
// of the joint p(x0, x_{t-1}, x_t).
namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat identity(int d) {
    Mat m(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int i = 0; i < d; ++i) m[i][i] = 1.0;
    return m;
}

/// a I + (1 - a) 1 m^T
inline Mat step_matrix(double a, const std::vector<double>& m) {
    const int d = static_cast<int>(m.size());
    Mat q = identity(d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) q[r][c] = a * (r == c) + (1.0 - a) * m[c];
    return q;
}

inline Mat multiply(const Mat& a, const Mat& b) {
    const std::size_t n = a.size(), k = b.size(), m = b[0].size();
    Mat out(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l)
            for (std::size_t j = 0; j < m; ++j) out[i][j] += a[i][l] * b[l][j];
    return out;
}

/// Q^1 Q^2 ... Q^t from per-step alphas (alphas[0] unused).
inline Mat product(const std::vector<double>& alphas, int t, const std::vector<double>& m) {
    Mat acc = identity(static_cast<int>(m.size()));
    for (int s = 1; s <= t; ++s) acc = multiply(acc, step_matrix(alphas[s], m));
    return acc;
}

/// P(x_{t-1} = . | x_t = a, x_0 = x0) by Bayes over the explicit joint.
inline std::vector<double> bayes_posterior(const std::vector<double>& alphas, int t, const std::vector<double>& m,
                                           int x0, int a) {
    const Mat prev = product(alphas, t - 1, m);
    const Mat step = step_matrix(alphas[t], m);
    const std::size_t d = m.size();
    std::vector<double> joint(d, 0.0);
    double z = 0.0;
    for (std::size_t xp = 0; xp < d; ++xp) {
        joint[xp] = prev[x0][xp] * step[xp][a];
        z += joint[xp];
    }
    for (auto& v : joint) v /= z;
    return joint;
}

}  // namespace oracle
