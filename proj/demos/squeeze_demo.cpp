// Squeezes an L-shaped domain and prints how the 2-D eigenvalues approach the graph limit.
#include <cstdio>

#include "thinlab/squeeze2d.hpp"

using namespace thinlab;

int main() {
    RectUnionDomain d{{{0, 1, 0, 1}, {1, 2, 0, 0.5}}};
    auto tab = convergence_sweep(d, {1.0, 0.5, 0.2, 0.1, 0.05}, 5, 1.0 / 32);
    std::printf("%6s %3s %12s %12s %12s\n", "eps", "j", "lambda_eps", "lambda_0", "gap");
    for (auto& r : tab.rows) std::printf("%6.2f %3d %12.5f %12.5f %12.3e\n", r.eps, r.j, r.lambda_eps, r.lambda_0, r.gap);
}
