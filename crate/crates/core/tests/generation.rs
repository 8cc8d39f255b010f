use foodsynth::coco::read_dataset;
use foodsynth::eval::mask_iou;
use foodsynth::generate::{generate_coco, generate_dataset};
use foodsynth::protocol::dataset_stats;
use foodsynth::randomizer::{DifficultySetting, GenConfig};

#[test]
fn two_hundred_default_images_have_plausible_instance_count() {
    // 3 to 5 foods per image (one per well), minus the occasional hidden one
    let ds = generate_coco(&GenConfig::default(), 200, 1, None, |_, _| {}).unwrap();
    let n = ds.annotations.len();
    assert!((600..=1600).contains(&n), "{n} instances");

    let stats = dataset_stats(&ds);
    assert_eq!(stats.instances, n);
    assert_eq!(stats.images_per_difficulty.values().sum::<usize>(), 200);
    assert_eq!(stats.instances_per_difficulty.values().sum::<usize>(), n);
    assert_eq!(stats.instances_per_image.values().sum::<usize>(), 200);
    // mixed difficulty reaches every tier
    assert_eq!(stats.images_per_difficulty.len(), 3);
}

#[test]
fn masks_within_an_image_do_not_overlap_after_encoding() {
    let config = GenConfig { image_size: [128, 128], min_mask_pixels: 16, ..GenConfig::default() };
    let ds = generate_coco(&config, 30, 2, None, |_, _| {}).unwrap();
    for img in &ds.images {
        let anns: Vec<_> = ds.annotations.iter().filter(|a| a.image_id == img.id).collect();
        for (i, a) in anns.iter().enumerate() {
            for b in &anns[i + 1..] {
                assert_eq!(mask_iou(&a.segmentation, &b.segmentation).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn fixed_difficulty_applies_to_every_image() {
    let dir = tempfile::tempdir().unwrap();
    let config = GenConfig { difficulty: DifficultySetting::Medium, image_size: [64, 64], ..GenConfig::default() };
    let (path, summary) = generate_dataset(&config, 5, 3, dir.path(), |_, _| {}).unwrap();
    assert_eq!(summary.per_difficulty.get("medium"), Some(&5));
    let ds = read_dataset(path).unwrap();
    assert_eq!(ds.images.len(), 5);
    assert!(dir.path().join("images/000004.png").exists());
    assert!(dir.path().join("masks/000004.png").exists());
}

#[test]
fn seeds_change_output() {
    let config = GenConfig { image_size: [64, 64], min_mask_pixels: 4, ..GenConfig::default() };
    let a = generate_coco(&config, 3, 1, None, |_, _| {}).unwrap();
    let b = generate_coco(&config, 3, 2, None, |_, _| {}).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, generate_coco(&config, 3, 1, None, |_, _| {}).unwrap());
}
