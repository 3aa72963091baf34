#pragma once

#include "seqmv/config.hpp"
#include "seqmv/entropy.hpp"
#include "seqmv/experiments.hpp"
#include "seqmv/fluctuation.hpp"
#include "seqmv/model.hpp"
#include "seqmv/parallel.hpp"
#include "seqmv/pde.hpp"
#include "seqmv/rng.hpp"
#include "seqmv/simulate.hpp"
#include "seqmv/sobolev.hpp"
#include "seqmv/trajectory.hpp"
#include "seqmv/weights.hpp"
