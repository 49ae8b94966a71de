#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "hybkan/spline.hpp"

using hybkan::EffKanLayer;
using hybkan::SplineGrid;
using hybkan::Tensor;

namespace {

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Direct Cox-de Boor hand evaluation for the uniform cubic cardinal B-spline:
// B(t) on knots {0,1,2,3,4} evaluated at its central knot t=2 is 2/3... the
// cardinal cubic value at the center is 4/6 = 2/3.
constexpr double kCubicCentral = 2.0 / 3.0;

}  // namespace

TEST_CASE("partition of unity inside (a,b)") {
    SplineGrid g = SplineGrid::make();
    hybkan::Rng rng(5);
    for (int it = 0; it < 10000; ++it) {
        const double x = rng.uniform(g.range_lo + 1e-9, g.range_hi - 1e-9);
        std::vector<double> basis(static_cast<std::size_t>(g.basis_count()));
        hybkan::bspline_basis_at(x, g, basis.data());
        double s = 0.0;
        for (double v : basis) s += v;
        if (std::abs(s - 1.0) >= 1e-10) {
            CHECK(std::abs(s - 1.0) < 1e-10);
            break;
        }
    }
    CHECK(g.basis_count() == 8);  // G + p with Table-1 defaults
}

TEST_CASE("order zero: indicator of the containing span") {
    SplineGrid g = SplineGrid::make(-1.5, 1.5, 5, 0);
    std::vector<double> basis(static_cast<std::size_t>(g.basis_count()));
    hybkan::bspline_basis_at(0.1, g, basis.data());
    int ones = 0;
    for (double v : basis) {
        CHECK((v == 0.0 || v == 1.0));
        if (v == 1.0) ++ones;
    }
    CHECK(ones == 1);
}

TEST_CASE("cubic central knot value is 2/3") {
    SplineGrid g = SplineGrid::make();
    const double h = g.spacing();
    // basis j has support [t_j, t_{j+p+1}]; its central knot is t_j + 2h
    std::vector<double> basis(static_cast<std::size_t>(g.basis_count()));
    for (int j = 0; j < g.basis_count(); ++j) {
        const double center = g.knots[static_cast<std::size_t>(j)] + 2.0 * h;
        if (center <= g.range_lo || center >= g.range_hi) continue;  // keep clear of the tails
        hybkan::bspline_basis_at(center, g, basis.data());
        CHECK(std::abs(basis[static_cast<std::size_t>(j)] - kCubicCentral) < 1e-12);
    }
}

TEST_CASE("local support: zero outside p+1 spans") {
    SplineGrid g = SplineGrid::make();
    hybkan::Rng rng(9);
    std::vector<double> basis(static_cast<std::size_t>(g.basis_count()));
    for (int it = 0; it < 2000; ++it) {
        const double x = rng.uniform(g.range_lo - 1.0, g.range_hi + 1.0);
        hybkan::bspline_basis_at(x, g, basis.data());
        for (int j = 0; j < g.basis_count(); ++j) {
            const double lo = g.knots[static_cast<std::size_t>(j)];
            const double hi = g.knots[static_cast<std::size_t>(j + g.order + 1)];
            if (x < lo || x > hi) CHECK(basis[static_cast<std::size_t>(j)] == 0.0);
        }
    }
}

TEST_CASE("cubic continuity: no jump in first differences") {
    SplineGrid g = SplineGrid::make();
    const double step = 1e-4;
    for (int j = 0; j < g.basis_count(); ++j) {
        double prev = 0.0;
        bool first = true;
        for (double x = g.range_lo - 0.5; x < g.range_hi + 0.5; x += step) {
            std::vector<double> basis(static_cast<std::size_t>(g.basis_count()));
            hybkan::bspline_basis_at(x, g, basis.data());
            const double v = basis[static_cast<std::size_t>(j)];
            if (!first) CHECK(std::abs(v - prev) < 10.0 * step);
            prev = v;
            first = false;
        }
    }
}

TEST_CASE("effkan zero paths") {
    SplineGrid g = SplineGrid::make();
    hybkan::Rng rng(1);
    EffKanLayer<double> l = hybkan::effkan_init<double>(3, 3, g, 0.1, 1.0, 1.0, rng);
    Tensor<double> x({2, 3});
    x.at(0, 0) = 0.3; x.at(0, 1) = -0.2; x.at(0, 2) = 0.9;
    x.at(1, 0) = -1.0; x.at(1, 1) = 0.5; x.at(1, 2) = 0.0;

    // C = 0, W_base = 0, b = 0 -> GELU(0) = 0
    l.C.setZero();
    l.W_base.setZero();
    l.b.setZero();
    Tensor<double> y = l.forward(x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.0);

    // C = 0, W_base = I -> GELU(x)
    for (std::size_t i = 0; i < 3; ++i) l.W_base.at(i, i) = 1.0;
    y = l.forward(x);
    Tensor<double> gx = hybkan::gelu(x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(gx[i]).epsilon(1e-14));

    Tensor<double> bad({2, 4});
    CHECK_THROWS_AS((void)l.forward(bad), hybkan::DimensionError);
}

TEST_CASE("effkan full gradient check vs central differences") {
    SplineGrid g = SplineGrid::make();
    hybkan::Rng rng(2);
    EffKanLayer<double> l = hybkan::effkan_init<double>(4, 3, g, 0.5, 1.0, 1.0, rng);
    Tensor<double> x({3, 4});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.2, 1.2);
    Tensor<double> w({3, 3});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);

    auto loss = [&]() { return dot(l.forward(x), w); };
    typename EffKanLayer<double>::Cache cache;
    (void)l.forward(x, &cache);
    l.zero_grads();
    Tensor<double> dx = l.backward(cache, w);

    CHECK(fd::check_tensor_grad(l.W_base, l.gW_base, loss) == 0);
    CHECK(fd::check_tensor_grad(l.C, l.gC, loss) == 0);
    CHECK(fd::check_tensor_grad(l.S, l.gS, loss) == 0);
    CHECK(fd::check_tensor_grad(l.b, l.gb, loss) == 0);
    CHECK(fd::check_tensor_grad(x, dx, loss) == 0);
}

TEST_CASE("effkan init contracts") {
    SplineGrid g = SplineGrid::make();
    hybkan::Rng rng1(77), rng2(77);
    EffKanLayer<double> a = hybkan::effkan_init<double>(5, 4, g, 0.1, 1.0, 1.0, rng1);
    EffKanLayer<double> b = hybkan::effkan_init<double>(5, 4, g, 0.1, 1.0, 1.0, rng2);
    for (std::size_t i = 0; i < a.W_base.size(); ++i) CHECK(a.W_base[i] == b.W_base[i]);
    for (std::size_t i = 0; i < a.C.size(); ++i) CHECK(a.C[i] == b.C[i]);

    hybkan::Rng rng3(78);
    EffKanLayer<double> z = hybkan::effkan_init<double>(5, 4, g, 0.0, 1.0, 1.0, rng3);
    for (std::size_t i = 0; i < z.C.size(); ++i) CHECK(z.C[i] == 0.0);

    // sampling statistics: empirical std of W_base within 5% of sqrt(2/d_in)*gain
    hybkan::Rng rng4(79);
    const std::size_t d_in = 10;
    const double target = std::sqrt(2.0 / static_cast<double>(d_in));
    double sum = 0.0, sumsq = 0.0;
    const int n = 100000;
    const double bound = hybkan::kaiming_uniform_bound(d_in, 1.0);
    for (int i = 0; i < n; ++i) {
        const double v = rng4.uniform(-bound, bound);
        sum += v;
        sumsq += v * v;
    }
    const double mean = sum / n;
    const double stdev = std::sqrt(sumsq / n - mean * mean);
    CHECK(std::abs(stdev - target) / target < 0.05);
}

TEST_CASE("effkan parameter count formula vs enumeration") {
    SplineGrid g = SplineGrid::make();
    CHECK(hybkan::effkan_param_count<double>(1, 1, g) == 11);
    CHECK(hybkan::effkan_param_count<double>(384, 1536, g) == 5899776);

    hybkan::Rng rng(3);
    for (int it = 0; it < 10; ++it) {
        const std::size_t di = 1 + rng.next_u64() % 20;
        const std::size_t dk = 1 + rng.next_u64() % 20;
        EffKanLayer<double> l = hybkan::effkan_init<double>(di, dk, g, 0.1, 1.0, 1.0, rng);
        const std::size_t enumerated =
            l.W_base.size() + l.C.size() + l.S.size() + l.b.size();
        CHECK(enumerated == hybkan::effkan_param_count<double>(di, dk, g));
    }
}
