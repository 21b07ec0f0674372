#pragma once

#include "emberpipe/arena.hpp"
#include "emberpipe/autonomy.hpp"
#include "emberpipe/calibration.hpp"
#include "emberpipe/cloud_io.hpp"
#include "emberpipe/detection.hpp"
#include "emberpipe/dynamics.hpp"
#include "emberpipe/errors.hpp"
#include "emberpipe/geometry.hpp"
#include "emberpipe/gnss.hpp"
#include "emberpipe/holes.hpp"
#include "emberpipe/jet.hpp"
#include "emberpipe/kdtree.hpp"
#include "emberpipe/localization.hpp"
#include "emberpipe/metrics.hpp"
#include "emberpipe/mission.hpp"
#include "emberpipe/pgm_io.hpp"
#include "emberpipe/range_study.hpp"
#include "emberpipe/ransac.hpp"
#include "emberpipe/rng.hpp"
#include "emberpipe/scenario.hpp"
#include "emberpipe/sensors.hpp"
#include "emberpipe/target_filter.hpp"
#include "emberpipe/thermal.hpp"
#include "emberpipe/thermal_image.hpp"
