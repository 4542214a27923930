#pragma once

#include "surfcon/context_matching.hpp"
#include "surfcon/context_model.hpp"
#include "surfcon/corpus.hpp"
#include "surfcon/error.hpp"
#include "surfcon/evaluation.hpp"
#include "surfcon/graph.hpp"
#include "surfcon/metrics.hpp"
#include "surfcon/numerics.hpp"
#include "surfcon/parallel.hpp"
#include "surfcon/ranker_training.hpp"
#include "surfcon/ranking.hpp"
#include "surfcon/splits.hpp"
#include "surfcon/surface_encoder.hpp"
#include "surfcon/synthetic.hpp"
#include "surfcon/text.hpp"
