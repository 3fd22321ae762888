#pragma once

#include "semcorr/error.hpp"
#include "semcorr/rng.hpp"
#include "semcorr/parallel.hpp"
#include "semcorr/tensor.hpp"
#include "semcorr/tensor_io.hpp"
#include "semcorr/autograd.hpp"
#include "semcorr/geometry.hpp"
#include "semcorr/ops.hpp"
#include "semcorr/losses.hpp"
#include "semcorr/optim.hpp"
#include "semcorr/checkpoint.hpp"
#include "semcorr/layers.hpp"
#include "semcorr/backbone.hpp"
#include "semcorr/hypercolumn.hpp"
#include "semcorr/region.hpp"
#include "semcorr/mining.hpp"
#include "semcorr/embedding.hpp"
#include "semcorr/matcher.hpp"
#include "semcorr/eval.hpp"
#include "semcorr/image_io.hpp"
#include "semcorr/dataset.hpp"
#include "semcorr/config.hpp"
#include "semcorr/pipeline.hpp"
