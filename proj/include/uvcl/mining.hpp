#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <string>
#include <vector>

// Cross-video hard negative mining. Key embeddings from recent steps sit in a
// fixed-capacity FIFO queue, tagged with their source video so entries from
// the anchor's own video can be excluded. A softmax over scaled similarities
// scores hardness, and the top-n entries are blended into one synthesized
// negative.
namespace uvcl::mining {

struct QueueEntry {
    std::vector<double> z;  // unit-norm embedding
    std::string video_id;
    std::uint64_t insert_id = 0;  // monotone; lower = older
};

class NegativeQueue {
  public:
    explicit NegativeQueue(std::size_t capacity);

    // Entries must be unit norm within 1e-6 and of a consistent dimension.
    // When full, the oldest entries are evicted first.
    void enqueue(const std::vector<double>& z, const std::string& video_id);
    void enqueue_batch(const std::vector<std::vector<double>>& zs,
                       const std::vector<std::string>& video_ids);

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }

    // Mining starts only once the queue holds max(top_n, capacity / 2)
    // entries.
    bool warmed_up(int top_n) const;

    const std::deque<QueueEntry>& entries() const { return entries_; }

    // Entries not tagged with exclude_video, in insertion order. Pass an
    // empty string to keep everything.
    std::vector<const QueueEntry*> eligible(const std::string& exclude_video) const;

    void save(std::ostream& os) const;
    static NegativeQueue load(std::istream& is);

  private:
    std::size_t capacity_;
    std::size_t dim_ = 0;
    std::uint64_t next_id_ = 0;
    std::deque<QueueEntry> entries_;
};

// Softmax over s(q, z_i) / tau for the given entries. Entry order is
// preserved; weights sum to 1.
std::vector<double> alpha_weights(const std::vector<double>& q,
                                  const std::vector<const QueueEntry*>& entries, double tau);

// Convenience overload over the whole queue.
std::vector<double> alpha_weights(const std::vector<double>& q, const NegativeQueue& queue,
                                  double tau);

struct HardNegative {
    std::vector<double> z_hat;            // weighted blend, norm <= 1
    std::vector<std::uint64_t> entry_ids;  // selected entries, hardest first
    std::vector<double> alphas;            // their weights (softmax over all eligible)
};

// Picks the top_n eligible entries by weight (ties go to the older entry) and
// returns their weighted sum. The weights are taken from the softmax over the
// full eligible set and deliberately not renormalized over the selection.
HardNegative hard_negative_aggregate(const std::vector<double>& q, const NegativeQueue& queue,
                                     int top_n, double tau, const std::string& exclude_video);

}  // namespace uvcl::mining
