#pragma once

#include "ksir/baselines.hpp"
#include "ksir/engines.hpp"
#include "ksir/index.hpp"
#include "ksir/io.hpp"
#include "ksir/ranked_lists.hpp"
#include "ksir/scoring.hpp"
#include "ksir/topic_model.hpp"
#include "ksir/types.hpp"
#include "ksir/window.hpp"
