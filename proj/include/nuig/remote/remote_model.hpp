#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "nuig/model.hpp"
#include "nuig/remote/protocol.hpp"
#include "nuig/remote/transport.hpp"

namespace nuig::remote {

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
};

/// DifferentiableModel served by an external provider. Calls are serialized:
/// one request is in flight per connection and ids increase strictly.
class RemoteModel final : public DifferentiableModel {
 public:
  RemoteModel(std::unique_ptr<Transport> transport, RemoteOptions opts = {})
      : transport_(std::move(transport)), opts_(opts) {
    const std::uint64_t id = next_id_++;
    meta_ = decode_meta(exchange(encode_request(Op::meta, id)), id);
  }

  RemoteModel(const RemoteModel&) = delete;
  RemoteModel& operator=(const RemoteModel&) = delete;

  ~RemoteModel() override {
    try {
      std::lock_guard lock(mu_);
      const std::uint64_t id = next_id_++;
      transport_->send_line(encode_request(Op::shutdown, id));
      decode_ack(transport_->receive_line(std::chrono::milliseconds(2000)), id);
    } catch (...) {
    }
  }

  const Shape& input_shape() const override { return meta_.shape; }
  std::size_t num_classes() const override { return meta_.classes; }
  std::string name() const override { return meta_.name.empty() ? "RemoteModel" : "RemoteModel(" + meta_.name + ")"; }
  const Meta& meta() const { return meta_; }

  std::vector<double> forward_batch(std::span<const Tensor> inputs, TargetSpec target) const override {
    check_target(target);
    check_inputs(inputs);
    if (inputs.empty()) return {};
    std::lock_guard lock(mu_);
    const std::uint64_t id = next_id_++;
    return decode_probs(locked_exchange(encode_request(Op::forward, id, target.class_index, inputs, meta_.shape)), id,
                        inputs.size());
  }

  std::vector<Tensor> grad_batch(std::span<const Tensor> inputs, TargetSpec target) const override {
    check_target(target);
    check_inputs(inputs);
    if (inputs.empty()) return {};
    std::lock_guard lock(mu_);
    const std::uint64_t id = next_id_++;
    return decode_grads(locked_exchange(encode_request(Op::grad, id, target.class_index, inputs, meta_.shape)), id,
                        inputs.size(), meta_.shape);
  }

 private:
  std::string exchange(const std::string& request) const {
    std::lock_guard lock(mu_);
    return locked_exchange(request);
  }

  std::string locked_exchange(const std::string& request) const {
    transport_->send_line(request);
    return transport_->receive_line(opts_.timeout);
  }

  std::unique_ptr<Transport> transport_;
  RemoteOptions opts_;
  Meta meta_;
  mutable std::mutex mu_;
  mutable std::uint64_t next_id_ = 1;
};

inline std::unique_ptr<RemoteModel> connect(std::string_view endpoint, RemoteOptions opts = {}) {
  return std::make_unique<RemoteModel>(open_transport(endpoint), opts);
}

}  // namespace nuig::remote
