#ifndef SPANLINE_SYNTHETIC_H_
#define SPANLINE_SYNTHETIC_H_

#include <cstdint>

#include "spanline/corpus.h"

namespace spanline {

// Templated traffic-law questions over the standard 16-label scheme with
// label frequencies roughly proportional to the reference corpus. Each label
// draws its span words from a disjoint pool, so the mapping is learnable
// from word identity alone. Deterministic given seed; every label occurs at
// least once for count >= 32.
Corpus make_synthetic_corpus(int count, std::uint64_t seed);

}  // namespace spanline

#endif  // SPANLINE_SYNTHETIC_H_
