#pragma once

#include "infograph/checkpoint.hpp"
#include "infograph/config.hpp"
#include "infograph/encoder.hpp"
#include "infograph/error.hpp"
#include "infograph/evaluate.hpp"
#include "infograph/graph.hpp"
#include "infograph/infomax.hpp"
#include "infograph/log.hpp"
#include "infograph/nn.hpp"
#include "infograph/recipes.hpp"
#include "infograph/rng.hpp"
#include "infograph/semisup.hpp"
#include "infograph/synth.hpp"
#include "infograph/tensor.hpp"
#include "infograph/train.hpp"
#include "infograph/tu_format.hpp"
