#pragma once

#include "seedplan/errors.hpp"
#include "seedplan/csv.hpp"
#include "seedplan/data.hpp"
#include "seedplan/mtl.hpp"
#include "seedplan/model_io.hpp"
#include "seedplan/synthetic.hpp"
#include "seedplan/evaluation.hpp"
#include "seedplan/risk.hpp"
#include "seedplan/portfolio.hpp"
#include "seedplan/planning.hpp"
#include "seedplan/parallel.hpp"
#include "seedplan/svg.hpp"
#include "seedplan/pipeline.hpp"
