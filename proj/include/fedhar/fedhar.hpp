#pragma once

#include "fedhar/adam.hpp"
#include "fedhar/data.hpp"
#include "fedhar/federation.hpp"
#include "fedhar/fft.hpp"
#include "fedhar/harness.hpp"
#include "fedhar/losses.hpp"
#include "fedhar/model.hpp"
#include "fedhar/nn.hpp"
#include "fedhar/param_set.hpp"
#include "fedhar/pca.hpp"
#include "fedhar/personalize.hpp"
#include "fedhar/report.hpp"
#include "fedhar/rng.hpp"
#include "fedhar/signals.hpp"
#include "fedhar/tensor.hpp"
#include "fedhar/training.hpp"
