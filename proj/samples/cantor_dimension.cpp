// Box-counting and sausage estimates for the middle-half Cantor set.
#include <cstdio>

#include "sfl/dimension.hpp"

using namespace sfl;

int main(int argc, char** argv) {
    const int depth = argc > 1 ? std::atoi(argv[1]) : 12;
    const InitialSet c = make_cantor(0.25, depth);
    const auto ladder = power_ladder(4.0, 2, std::min(depth - 2, 10));

    const auto grid = estimate_box_dimension(c, ladder);
    MeasureOptions mo;
    mo.seed = 1;
    const auto mink = estimate_minkowski_dimension(c.points, ladder, Box::cube(1, -0.1, 1.1), mo);

    std::printf("%zu points, theory %.4f\n", c.points.size(), *c.theoretical_dim);
    std::printf("%-10s %10s %10s\n", "eps", "N(eps)", "mu(eps)");
    for (std::size_t k = 0; k < grid.eps.size(); ++k)
        std::printf("%-10.3g %10.0f %10.4g\n", grid.eps[k], grid.values[k], mink.values[k]);
    std::printf("grid count %.4f (r2 %.5f)\nsausage    %.4f (r2 %.5f)\n", grid.fitted_dim, grid.r_squared,
                mink.fitted_dim, mink.r_squared);
}
