#pragma once

#include "sheetaudit/ddg.hpp"
#include "sheetaudit/equivalence.hpp"
#include "sheetaudit/error.hpp"
#include "sheetaudit/formula.hpp"
#include "sheetaudit/grid.hpp"
#include "sheetaudit/modules.hpp"
#include "sheetaudit/report.hpp"
#include "sheetaudit/semantic.hpp"
#include "sheetaudit/srg.hpp"
