#pragma once

#include "coocmap/error.hpp"
#include "coocmap/corpus.hpp"
#include "coocmap/kernels.hpp"
#include "coocmap/cooc.hpp"
#include "coocmap/assoc.hpp"
#include "coocmap/align.hpp"
#include "coocmap/eval.hpp"
#include "coocmap/pipeline.hpp"
#include "coocmap/bench.hpp"
