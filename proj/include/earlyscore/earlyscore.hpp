#pragma once

#include "bench.hpp"
#include "cascade.hpp"
#include "error.hpp"
#include "ingest.hpp"
#include "netexport.hpp"
#include "online.hpp"
#include "pipeline.hpp"
#include "scoring.hpp"
#include "synthetic.hpp"
