#pragma once

#include "gsmat/blockdiag.hpp"
#include "gsmat/chain.hpp"
#include "gsmat/container.hpp"
#include "gsmat/error.hpp"
#include "gsmat/gs.hpp"
#include "gsmat/gsconv.hpp"
#include "gsmat/gsoft.hpp"
#include "gsmat/linalg.hpp"
#include "gsmat/matrix.hpp"
#include "gsmat/ortho.hpp"
#include "gsmat/perm.hpp"
#include "gsmat/random.hpp"

namespace gsmat {
inline constexpr const char* kVersion = "0.1.0";
}
