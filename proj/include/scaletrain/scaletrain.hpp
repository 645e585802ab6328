#pragma once

#include "scaletrain/architecture.hpp"
#include "scaletrain/checkpoint.hpp"
#include "scaletrain/conv.hpp"
#include "scaletrain/cost_model.hpp"
#include "scaletrain/dataset.hpp"
#include "scaletrain/error.hpp"
#include "scaletrain/experiment.hpp"
#include "scaletrain/init.hpp"
#include "scaletrain/layers.hpp"
#include "scaletrain/network.hpp"
#include "scaletrain/random.hpp"
#include "scaletrain/report.hpp"
#include "scaletrain/resample.hpp"
#include "scaletrain/scale_plan.hpp"
#include "scaletrain/schedule.hpp"
#include "scaletrain/sgd.hpp"
#include "scaletrain/surgery.hpp"
#include "scaletrain/synthetic.hpp"
#include "scaletrain/tensor.hpp"
#include "scaletrain/train_log.hpp"
#include "scaletrain/trainer.hpp"
