#pragma once

#include "imtriage/grouping.hpp"
#include "imtriage/session.hpp"

#include <random>

namespace imt_test {

/// Session config with a short t-SNE run, for tests that only need a layout.
imtriage::SessionConfig quick_config(std::uint64_t seed = 42);

/// `n` ids "img0".. with Gaussian-blob features (three blobs).
imtriage::SessionInput blob_input(int n, int dim, std::uint64_t seed);

imtriage::Session blob_session(int n, int dim, std::uint64_t seed, const std::string& id = "s");

/// Smooth pair scorer in (0,1) that depends only on feature distance.
imtriage::PairScorer distance_scorer();

/// Applies one random user or automation operation. Operations the session
/// rejects are swallowed; returns a short name of what was attempted.
std::string random_operation(imtriage::Session& session, std::mt19937_64& rng);

} // namespace imt_test
