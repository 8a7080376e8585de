#pragma once

#include <penest/csv.hpp>
#include <penest/demand.hpp>
#include <penest/experiment.hpp>
#include <penest/highway.hpp>
#include <penest/kalman.hpp>
#include <penest/ltv.hpp>
#include <penest/metanet.hpp>
#include <penest/noise.hpp>
#include <penest/observability.hpp>
#include <penest/scenario.hpp>
