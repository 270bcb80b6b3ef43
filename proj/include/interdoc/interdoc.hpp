#pragma once

#include "interdoc/binary.hpp"
#include "interdoc/checkpoint.hpp"
#include "interdoc/config.hpp"
#include "interdoc/corpus.hpp"
#include "interdoc/encoder.hpp"
#include "interdoc/error.hpp"
#include "interdoc/eval.hpp"
#include "interdoc/features.hpp"
#include "interdoc/html.hpp"
#include "interdoc/index.hpp"
#include "interdoc/io.hpp"
#include "interdoc/losses.hpp"
#include "interdoc/metrics.hpp"
#include "interdoc/optim.hpp"
#include "interdoc/rerank.hpp"
#include "interdoc/rng.hpp"
#include "interdoc/synth.hpp"
#include "interdoc/text.hpp"
#include "interdoc/tokenize.hpp"
#include "interdoc/train.hpp"
