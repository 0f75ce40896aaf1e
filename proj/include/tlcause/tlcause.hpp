#pragma once

#include "tlcause/bit_vector.hpp"
#include "tlcause/checker.hpp"
#include "tlcause/csv.hpp"
#include "tlcause/engine.hpp"
#include "tlcause/error.hpp"
#include "tlcause/evaluation.hpp"
#include "tlcause/fdr.hpp"
#include "tlcause/formula.hpp"
#include "tlcause/granger.hpp"
#include "tlcause/inference.hpp"
#include "tlcause/market_sim.hpp"
#include "tlcause/trace.hpp"
