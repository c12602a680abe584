#pragma once

// Deliberate defects for exercising the gradient-check harness. Never enabled
// by training or inference code paths.

namespace rlms::fault_injection {

// Scales the conv2d weight gradient by 1.5 while enabled.
void corrupt_conv2d_backward(bool enabled);
bool conv2d_backward_corrupted();

}  // namespace rlms::fault_injection
