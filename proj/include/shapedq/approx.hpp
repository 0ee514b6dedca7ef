#pragma once

#include "shapedq/approx/huber.hpp"
#include "shapedq/approx/mlp.hpp"
#include "shapedq/approx/sample.hpp"
#include "shapedq/approx/serialize.hpp"
#include "shapedq/approx/tabular.hpp"
