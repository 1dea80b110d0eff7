#pragma once

#include "perfcast/analysis.hpp"
#include "perfcast/csv.hpp"
#include "perfcast/error.hpp"
#include "perfcast/gp.hpp"
#include "perfcast/hwforecast.hpp"
#include "perfcast/ingest.hpp"
#include "perfcast/io.hpp"
#include "perfcast/month.hpp"
#include "perfcast/normalize.hpp"
#include "perfcast/records.hpp"
#include "perfcast/scenario.hpp"
#include "perfcast/stats.hpp"
#include "perfcast/trend.hpp"
