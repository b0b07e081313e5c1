#pragma once

// Umbrella header for the whole library.

#include "afgn/adam.hpp"
#include "afgn/autoencoder.hpp"
#include "afgn/checkpoint.hpp"
#include "afgn/config.hpp"
#include "afgn/dataset.hpp"
#include "afgn/detector.hpp"
#include "afgn/errors.hpp"
#include "afgn/gemm.hpp"
#include "afgn/image.hpp"
#include "afgn/metrics.hpp"
#include "afgn/ops.hpp"
#include "afgn/parallel.hpp"
#include "afgn/pipeline.hpp"
#include "afgn/rng.hpp"
#include "afgn/spectrum.hpp"
#include "afgn/synth.hpp"
#include "afgn/tensor.hpp"
