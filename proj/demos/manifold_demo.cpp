// Builds the inertial-manifold chart for the bistable equation on an L-shaped domain
// and shows the chart of each squeezed problem converging to the graph chart.
#include <cstdio>

#include "thinlab/manifold.hpp"

using namespace thinlab;

int main() {
    RectUnionDomain d{{{0, 1, 0, 1}, {1, 2, 0, 0.5}}};
    auto t = epsilon_compare(d, {0.2, 0.1, 0.05}, box_grid(3, 1.0, 2));
    std::printf("nu = %d, graph chart contraction factor %.2e\n", t.nu, t.graph.max_factor());
    std::printf("%6s %12s %12s %12s %12s\n", "eps", "dLambda", "dDLambda", "dv", "dDv");
    for (auto& r : t.rows) std::printf("%6.3f %12.3e %12.3e %12.3e %12.3e\n", r.eps, r.dLambda, r.dDLambda, r.dv, r.dDv);
    std::printf("monotone: %s\n", t.monotone() ? "yes" : "no");
}
