// Draw random enumerable worlds and report the matching error bound for
// each. Usage: world_check [count] [seed]

#include <cstdio>
#include <cstdlib>

#include "rock/rock.hpp"

using namespace rock;

int main(int argc, char** argv) {
  const std::size_t count = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 5;
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;

  std::printf("%-6s %-3s %-9s %-9s %-9s %-6s %s\n", "world", "K", "ate", "lhs", "bound", "groups", "holds");
  for (std::size_t i = 0; i < count; ++i) {
    const SyntheticWorld w = random_world(hash_combine(seed, i));
    const PropositionReport r = verify_proposition(w);
    std::printf("%-6zu %-3zu %+.5f  %.5f  %.5f  %-6zu %s\n", i, w.covariate_count(), r.delta_true, r.lhs, r.bound,
                r.groups, r.holds ? "yes" : "NO");
  }
}
