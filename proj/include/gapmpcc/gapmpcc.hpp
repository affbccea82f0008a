#pragma once

#include "gapmpcc/cli.hpp"
#include "gapmpcc/dderiv.hpp"
#include "gapmpcc/dgap.hpp"
#include "gapmpcc/inner.hpp"
#include "gapmpcc/model.hpp"
#include "gapmpcc/outer.hpp"
#include "gapmpcc/problems.hpp"
#include "gapmpcc/report.hpp"
#include "gapmpcc/stationarity.hpp"
#include "gapmpcc/types.hpp"
#include "gapmpcc/verify.hpp"
