#pragma once

namespace asf {

// Keeps freed heap memory mapped between training steps. Large autograd
// buffers otherwise go back to the kernel every iteration and are
// page-faulted in again. No-op outside glibc.
void tune_allocator();

}  // namespace asf
