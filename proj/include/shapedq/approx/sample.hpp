#pragma once

#include "shapedq/types.hpp"

namespace shapedq {

/// One regression item: move Q(state, action) towards target.
struct TrainingSample
{
	const Observation* state = nullptr;
	int action = 0;
	double target = 0.0;
};

} // namespace shapedq
