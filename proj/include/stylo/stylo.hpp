#pragma once

// Convenience include for the whole library.

#include "stylo/attribution.hpp"
#include "stylo/config.hpp"
#include "stylo/corpus.hpp"
#include "stylo/dateline.hpp"
#include "stylo/embed.hpp"
#include "stylo/errors.hpp"
#include "stylo/io.hpp"
#include "stylo/knn.hpp"
#include "stylo/matrix.hpp"
#include "stylo/model_io.hpp"
#include "stylo/pipeline.hpp"
#include "stylo/reduce.hpp"
#include "stylo/rng.hpp"
#include "stylo/svg.hpp"
#include "stylo/temporal.hpp"
