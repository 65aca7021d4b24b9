#pragma once

#include "gcn/aux.hpp"
#include "gcn/checkpoint.hpp"
#include "gcn/corpus.hpp"
#include "gcn/encoding.hpp"
#include "gcn/error.hpp"
#include "gcn/eval.hpp"
#include "gcn/lstm.hpp"
#include "gcn/model.hpp"
#include "gcn/reverse.hpp"
#include "gcn/sampler.hpp"
#include "gcn/scoring.hpp"
#include "gcn/stream.hpp"
#include "gcn/train.hpp"
#include "gcn/vocabulary.hpp"
