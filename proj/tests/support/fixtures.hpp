#pragma once

#include "sheetaudit/grid.hpp"

#include <string>

namespace fixtures {

// Two input rows summed per row, then a grand total.
inline const std::string kS1 = "1,2,=A1+B1\n3,4,=A2+B2\n,,=C1+C2\n";

// One shared intermediate A3 feeding two results.
inline const std::string kS2 = "1,,\n2,,\n=A1+A2,=A3*2,=A3+1\n";

// Rows 2-3: B = A*2, C = B+1.
inline const std::string kS3 = ",,\n,=A2*2,=B2+1\n,=A3*2,=B3+1\n";

inline sheetaudit::Sheet s1() { return sheetaudit::load_csv(kS1); }
inline sheetaudit::Sheet s2() { return sheetaudit::load_csv(kS2); }
inline sheetaudit::Sheet s3() { return sheetaudit::load_csv(kS3); }

inline sheetaudit::CellAddr at(const char* a1) { return sheetaudit::parse_a1(a1); }

} // namespace fixtures
