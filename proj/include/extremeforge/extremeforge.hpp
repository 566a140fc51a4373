#pragma once

#include "extremeforge/error.hpp"
#include "extremeforge/types.hpp"
#include "extremeforge/image.hpp"
#include "extremeforge/image_io.hpp"
#include "extremeforge/dataset.hpp"
#include "extremeforge/pyramid.hpp"
#include "extremeforge/style.hpp"
#include "extremeforge/prng.hpp"
#include "extremeforge/classical.hpp"
#include "extremeforge/parallel.hpp"
#include "extremeforge/planner.hpp"
#include "extremeforge/eval.hpp"
#include "extremeforge/report.hpp"
