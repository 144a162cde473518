#include "weclick/inference.hpp"

#include <stdexcept>
#include <string>

#include "weclick/tensor_io.hpp"

namespace weclick {
inline namespace WECLICK_ABI {

LabelMap predict(const SegNet& net, const Tensor& frame) { return argmax_channel(forward(net, frame)); }

LabelMap infer(const Checkpoint& student, const Tensor& frame) {
  if (student.net.role != NetRole::student) {
    throw std::invalid_argument("infer: checkpoint role is '" + to_string(student.net.role) + "', expected 'student'");
  }
  if (frame.rank() == 4 && frame.dim(0) != 1) {
    throw std::invalid_argument("infer: expected a single frame, got " + std::to_string(frame.dim(0)) +
                                " frames " + shape_to_string(frame.shape()));
  }
  return predict(student.net, frame);
}

LabelMap infer(const Checkpoint& student, std::span<const Tensor> frames) {
  if (frames.size() != 1) {
    throw std::invalid_argument("infer: expected a single frame, got " + std::to_string(frames.size()));
  }
  return infer(student, frames[0]);
}

Checkpoint load_student(const std::filesystem::path& dir) {
  Checkpoint ck = load_checkpoint(dir);
  if (ck.net.role != NetRole::student) {
    throw std::invalid_argument(dir.string() + ": role is '" + to_string(ck.net.role) + "', expected 'student'");
  }
  ck.net.set_trainable(false);
  return ck;
}

LabelMap infer_file(const std::filesystem::path& checkpoint_dir, const std::filesystem::path& frame_path,
                    const std::filesystem::path& out_path) {
  const Checkpoint ck = load_student(checkpoint_dir);
  const Tensor frame = load_tensor(frame_path);
  LabelMap pred = infer(ck, frame);
  std::vector<Real> values(pred.values.begin(), pred.values.end());
  save_tensor(out_path, Tensor({pred.height, pred.width}, std::move(values)));
  return pred;
}

}  // namespace WECLICK_ABI
}  // namespace weclick
