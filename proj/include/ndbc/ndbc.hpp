#pragma once

#include "ndbc/error.hpp"
#include "ndbc/geometry.hpp"
#include "ndbc/fields.hpp"
#include "ndbc/kernel.hpp"
#include "ndbc/graph_energy.hpp"
#include "ndbc/elliptic.hpp"
#include "ndbc/evolution.hpp"
#include "ndbc/analysis.hpp"
#include "ndbc/fixtures.hpp"
#include "ndbc/seeding.hpp"
#include "ndbc/io.hpp"
#include "ndbc/svg.hpp"
#include "ndbc/config.hpp"
#include "ndbc/experiment.hpp"
