#include "afem/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace afem {

namespace {

TriRule make_centroid_rule() {
    TriRule r;
    r.degree = 1;
    r.bary = {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
    r.weights = {1.0};
    return r;
}

TriRule make_degree2_rule() {
    TriRule r;
    r.degree = 2;
    const double a = 1.0 / 6.0, b = 2.0 / 3.0;
    r.bary = {{b, a, a}, {a, b, a}, {a, a, b}};
    r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return r;
}

void push_sym3(TriRule& r, double a, double w) {
    const double c = 1.0 - 2.0 * a;
    r.bary.push_back({c, a, a});
    r.bary.push_back({a, c, a});
    r.bary.push_back({a, a, c});
    r.weights.insert(r.weights.end(), 3, w);
}

// Dunavant order 4, six points, all weights positive.
TriRule make_degree4_rule() {
    TriRule r;
    r.degree = 4;
    push_sym3(r, 0.445948490915965, 0.223381589678011);
    push_sym3(r, 0.091576213509771, 0.109951743655322);
    return r;
}

// Classical seven-point degree-5 rule.
TriRule make_degree5_rule() {
    TriRule r;
    r.degree = 5;
    r.bary.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    r.weights.push_back(9.0 / 40.0);
    const double s15 = std::sqrt(15.0);
    push_sym3(r, (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
    push_sym3(r, (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
    return r;
}

}  // namespace

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1 required");
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev initial guess, Newton on P_n.
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

TriRule conical_tri_rule(int degree) {
    if (degree < 1) degree = 1;
    // int_T f = int_0^1 int_0^1 f(u, v(1-u)) (1-u) dv du on the reference
    // triangle; the extra (1-u) raises the u-degree by one.
    const int nu = (degree + 3) / 2;
    const int nv = (degree + 2) / 2;
    std::vector<double> xu, wu, xv, wv;
    gauss_legendre(nu, xu, wu);
    gauss_legendre(nv, xv, wv);
    TriRule r;
    r.degree = degree;
    for (int i = 0; i < nu; ++i) {
        const double u = 0.5 * (xu[i] + 1.0);
        const double cu = 0.5 * wu[i];
        for (int j = 0; j < nv; ++j) {
            const double v = 0.5 * (xv[j] + 1.0);
            const double cv = 0.5 * wv[j];
            const double x = u;
            const double y = v * (1.0 - u);
            r.bary.push_back({1.0 - x - y, x, y});
            // Jacobian (1-u); normalize so weights sum to 1 over the
            // reference triangle of area 1/2.
            r.weights.push_back(2.0 * cu * cv * (1.0 - u));
        }
    }
    return r;
}

const TriRule& tri_rule(int degree) {
    static const TriRule r1 = make_centroid_rule();
    static const TriRule r2 = make_degree2_rule();
    static const TriRule r4 = make_degree4_rule();
    static const TriRule r5 = make_degree5_rule();
    if (degree <= 1) return r1;
    if (degree == 2) return r2;
    if (degree <= 4) return r4;
    if (degree == 5) return r5;
    static std::map<int, TriRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(degree);
    if (it == cache.end()) it = cache.emplace(degree, conical_tri_rule(degree)).first;
    return it->second;
}

const EdgeRule& edge_rule(int degree) {
    static std::map<int, EdgeRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    const int n = std::max(1, (degree + 2) / 2);
    auto it = cache.find(n);
    if (it == cache.end()) {
        EdgeRule r;
        r.degree = 2 * n - 1;
        std::vector<double> x, w;
        gauss_legendre(n, x, w);
        for (int i = 0; i < n; ++i) {
            r.points.push_back(0.5 * (x[i] + 1.0));
            r.weights.push_back(0.5 * w[i]);
        }
        it = cache.emplace(n, std::move(r)).first;
    }
    return it->second;
}

}  // namespace afem
