#pragma once

#include "iscr/commands.hpp"
#include "iscr/compare.hpp"
#include "iscr/config.hpp"
#include "iscr/corpus.hpp"
#include "iscr/cotrain.hpp"
#include "iscr/dialogue.hpp"
#include "iscr/dqn.hpp"
#include "iscr/episode.hpp"
#include "iscr/error.hpp"
#include "iscr/features.hpp"
#include "iscr/http_service.hpp"
#include "iscr/metrics.hpp"
#include "iscr/nn.hpp"
#include "iscr/retrieval.hpp"
#include "iscr/rng.hpp"
#include "iscr/session.hpp"
#include "iscr/simulator.hpp"
#include "iscr/synthetic.hpp"
