#pragma once

// Umbrella header for the full library.

#include "tikholearn/experiments.hpp"
#include "tikholearn/io.hpp"
#include "tikholearn/model.hpp"
#include "tikholearn/param_learn.hpp"
#include "tikholearn/rng.hpp"
#include "tikholearn/sampling.hpp"
#include "tikholearn/subspace.hpp"
#include "tikholearn/tikhonov.hpp"
#include "tikholearn/toy.hpp"
