#pragma once

#include "latlab/analysis.hpp"
#include "latlab/checkpoint.hpp"
#include "latlab/container.hpp"
#include "latlab/dataset.hpp"
#include "latlab/discovery.hpp"
#include "latlab/engine.hpp"
#include "latlab/error.hpp"
#include "latlab/fixtures.hpp"
#include "latlab/manifest.hpp"
#include "latlab/mat.hpp"
#include "latlab/rng.hpp"
#include "latlab/sae.hpp"
#include "latlab/stats.hpp"
#include "latlab/steering.hpp"
#include "latlab/tokenizer.hpp"
