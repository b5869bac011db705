#pragma once

#include "gdiff/checkpoint.hpp"
#include "gdiff/corpus.hpp"
#include "gdiff/denoiser.hpp"
#include "gdiff/diffusion.hpp"
#include "gdiff/error.hpp"
#include "gdiff/eval.hpp"
#include "gdiff/graph.hpp"
#include "gdiff/hash.hpp"
#include "gdiff/io.hpp"
#include "gdiff/orbits.hpp"
#include "gdiff/rng.hpp"
#include "gdiff/stats.hpp"
#include "gdiff/synth.hpp"
#include "gdiff/text.hpp"
#include "gdiff/train.hpp"
#include "gdiff/workflow.hpp"
